// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Spatial-asymmetric attention: directional k x 1 / 1 x k convolutions feed a
// channel-pooled spatial gate per direction, a large-kernel global branch
// feeds a squeeze-excitation channel gate, and the combined gate multiplies
// the input features.

#pragma once

#include "sagan/nn.hpp"
#include "sagan/ops.hpp"

namespace sagan {

template <typename T>
struct SAAttentionParams {
    int channels = 0;
    int kernel = 9;    // asymmetric and square extents share one knob
    int reduction = 16;
    ConvLayer<T> asym_v;  // k x 1
    ConvLayer<T> asym_h;  // 1 x k
    ConvLayer<T> spatial_v; // 2 -> 1, k x k (per-branch weights)
    ConvLayer<T> spatial_h;
    ConvLayer<T> global_conv; // C -> C, k x k
    LinearLayer<T> fc1; // C -> C/r
    LinearLayer<T> fc2; // C/r -> C
};

template <typename T>
SAAttentionParams<T> make_sa_attention(ParamSet<T>& ps, const std::string& name, int channels,
                                       int kernel, int reduction, uint64_t seed) {
    if (channels % reduction != 0)
        throw ShapeError("attention: channels " + std::to_string(channels) +
                         " not divisible by reduction " + std::to_string(reduction));
    SAAttentionParams<T> p;
    p.channels = channels;
    p.kernel = kernel;
    p.reduction = reduction;
    p.asym_v = make_conv(ps, name + ".av", channels, channels, kernel, 1, seed);
    p.asym_h = make_conv(ps, name + ".ah", channels, channels, 1, kernel, seed);
    p.spatial_v = make_conv(ps, name + ".sv", 1, 2, kernel, kernel, seed);
    p.spatial_h = make_conv(ps, name + ".sh", 1, 2, kernel, kernel, seed);
    p.global_conv = make_conv(ps, name + ".gc", channels, channels, kernel, kernel, seed);
    p.fc1 = make_linear(ps, name + ".fc1", channels / reduction, channels, seed);
    p.fc2 = make_linear(ps, name + ".fc2", channels, channels / reduction, seed);
    return p;
}

// Intermediate values exposed for verification.
template <typename T>
struct AttentionTrace {
    TensorPtr<T> f_v, f_h, f_c, f_g, s_a;
};

template <typename T>
TensorPtr<T> spatial_asymmetric_attention(const TensorPtr<T>& x, const SAAttentionParams<T>& p,
                                          AttentionTrace<T>* trace = nullptr) {
    const auto v = detail::as_nchw(x->shape, "spatial_asymmetric_attention");
    if (v.c != p.channels)
        throw ShapeError("attention: input has " + std::to_string(v.c) + " channels, params expect " +
                         std::to_string(p.channels));

    auto branch_gate = [&](const ConvLayer<T>& asym, const ConvLayer<T>& spatial) {
        auto dir = conv2d(x, asym.w, asym.b, 1, Padding::Same);
        auto pooled = concat_channels(channel_avg(dir), channel_max(dir));
        return sigmoid(conv2d(pooled, spatial.w, spatial.b, 1, Padding::Same));
    };
    auto f_v = branch_gate(p.asym_v, p.spatial_v);
    auto f_h = branch_gate(p.asym_h, p.spatial_h);
    auto f_c = add(f_v, f_h); // (N,)1,H,W in (0,2)

    auto global_feat = conv2d(x, p.global_conv.w, p.global_conv.b, 1, Padding::Same);
    auto squeezed = global_avg(global_feat); // (N,)C
    auto hidden = leaky_relu(linear(squeezed, p.fc1.w, p.fc1.b), T(0.2));
    auto f_g = sigmoid(linear(hidden, p.fc2.w, p.fc2.b)); // (N,)C in (0,1)

    const std::vector<int> gate_shape = v.batched ? std::vector<int>{v.n, v.c, 1, 1}
                                                  : std::vector<int>{v.c, 1, 1};
    auto s_a = leaky_relu(mul(f_c, reshape(f_g, gate_shape)), T(0.2));
    auto out = mul(x, s_a);

    if (trace) {
        trace->f_v = f_v;
        trace->f_h = f_h;
        trace->f_c = f_c;
        trace->f_g = f_g;
        trace->s_a = s_a;
    }
    return out;
}

} // namespace sagan
