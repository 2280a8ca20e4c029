// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// SAGAN generator and discriminator. The generator is a four-level U-Net
// (default widths 64/128/192/256) whose levels pair a residual block with a
// spatial-asymmetric attention block; downsampling is stride-2 convolution,
// upsampling is pixel shuffle, and skip connections pass through sigmoid
// feature gates. The discriminator stacks seven 3x3 conv layers (batch norm +
// swish, stride 2 on layers 1/3/5/7) on a channel-concatenated image pair,
// then one attention block and a 1x1 sigmoid head.

#pragma once

#include <string>
#include <vector>

#include "sagan/attention.hpp"
#include "sagan/nn.hpp"
#include "sagan/ops.hpp"

namespace sagan {

struct ModelConfig {
    std::vector<int> widths{64, 128, 192, 256};
    int attention_kernel = 9;
    int se_reduction = 16;
    bool use_attention = true;  // ablation: identity instead of SA blocks
    bool use_skip_gates = true; // ungated U-Net variant when false

    static ModelConfig full() { return ModelConfig{}; }

    // Desk-scale config for gradient checks and overfit runs.
    static ModelConfig toy() {
        ModelConfig c;
        c.widths = {8, 16, 24, 32};
        c.attention_kernel = 5;
        c.se_reduction = 4;
        return c;
    }

    void validate() const {
        if (widths.size() != 4) throw ShapeError("model config: expected 4 channel widths");
        int prev = 0;
        for (int w : widths) {
            if (w <= 0) throw ShapeError("model config: widths must be positive");
            if (w < prev) throw ShapeError("model config: widths must be non-decreasing");
            if (w % se_reduction != 0)
                throw ShapeError("model config: width " + std::to_string(w) +
                                 " not divisible by SE reduction " + std::to_string(se_reduction));
            prev = w;
        }
        if (attention_kernel < 1 || attention_kernel % 2 == 0)
            throw ShapeError("model config: attention kernel must be odd and positive");
    }
};

template <typename T>
struct ResidualBlock {
    ConvLayer<T> c1, c2;
};

template <typename T>
ResidualBlock<T> make_residual(ParamSet<T>& ps, const std::string& name, int channels,
                               uint64_t seed) {
    return {make_conv(ps, name + ".c1", channels, channels, 3, 3, seed),
            make_conv(ps, name + ".c2", channels, channels, 3, 3, seed)};
}

// x + conv(phi(conv(x)))
template <typename T>
TensorPtr<T> residual_block(const TensorPtr<T>& x, const ResidualBlock<T>& p) {
    auto inner = conv2d(leaky_relu(conv2d(x, p.c1.w, p.c1.b, 1, Padding::Same), T(0.2)), p.c2.w,
                        p.c2.b, 1, Padding::Same);
    return add(x, inner);
}

template <typename T>
struct LevelBlock {
    ResidualBlock<T> res;
    SAAttentionParams<T> sa;
};

template <typename T>
LevelBlock<T> make_level(ParamSet<T>& ps, const std::string& name, int channels,
                         const ModelConfig& cfg, uint64_t seed) {
    return {make_residual(ps, name + ".res", channels, seed),
            make_sa_attention(ps, name + ".sa", channels, cfg.attention_kernel, cfg.se_reduction,
                              seed)};
}

template <typename T>
TensorPtr<T> level_forward(const TensorPtr<T>& x, const LevelBlock<T>& p, bool use_attention) {
    auto y = residual_block(x, p.res);
    return use_attention ? spatial_asymmetric_attention(y, p.sa) : y;
}

// ---------------------------------------------------------------------------
// generator

template <typename T>
struct GeneratorParams {
    ModelConfig cfg;
    ParamSet<T> all;
    ConvLayer<T> stem;
    LevelBlock<T> enc1, enc2, enc3;
    ConvLayer<T> down1, down2, down3;
    LevelBlock<T> mid1, mid2;
    ConvLayer<T> up3, up2, up1; // 1x1 channel expanders feeding pixel shuffle
    ConvLayer<T> gate3, gate2, gate1;
    ConvLayer<T> fuse3, fuse2, fuse1;
    LevelBlock<T> dec3, dec2, dec1;
    ConvLayer<T> head;

    int64_t parameter_count() const { return all.count(); }
};

template <typename T>
GeneratorParams<T> init_generator(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    const int w0 = cfg.widths[0], w1 = cfg.widths[1], w2 = cfg.widths[2], w3 = cfg.widths[3];
    GeneratorParams<T> g;
    g.cfg = cfg;
    auto& ps = g.all;
    g.stem = make_conv(ps, "stem", w0, 1, 3, 3, seed);
    g.enc1 = make_level(ps, "enc1", w0, cfg, seed);
    g.down1 = make_conv(ps, "down1", w1, w0, 3, 3, seed);
    g.enc2 = make_level(ps, "enc2", w1, cfg, seed);
    g.down2 = make_conv(ps, "down2", w2, w1, 3, 3, seed);
    g.enc3 = make_level(ps, "enc3", w2, cfg, seed);
    g.down3 = make_conv(ps, "down3", w3, w2, 3, 3, seed);
    g.mid1 = make_level(ps, "mid1", w3, cfg, seed);
    g.mid2 = make_level(ps, "mid2", w3, cfg, seed);
    g.up3 = make_conv(ps, "up3", 4 * w2, w3, 1, 1, seed);
    g.gate3 = make_conv(ps, "gate3", w2, w2, 1, 1, seed);
    g.fuse3 = make_conv(ps, "fuse3", w2, 2 * w2, 3, 3, seed);
    g.dec3 = make_level(ps, "dec3", w2, cfg, seed);
    g.up2 = make_conv(ps, "up2", 4 * w1, w2, 1, 1, seed);
    g.gate2 = make_conv(ps, "gate2", w1, w1, 1, 1, seed);
    g.fuse2 = make_conv(ps, "fuse2", w1, 2 * w1, 3, 3, seed);
    g.dec2 = make_level(ps, "dec2", w1, cfg, seed);
    g.up1 = make_conv(ps, "up1", 4 * w0, w1, 1, 1, seed);
    g.gate1 = make_conv(ps, "gate1", w0, w0, 1, 1, seed);
    g.fuse1 = make_conv(ps, "fuse1", w0, 2 * w0, 3, 3, seed);
    g.dec1 = make_level(ps, "dec1", w0, cfg, seed);
    g.head = make_conv(ps, "head", 3, w0, 1, 1, seed);
    return g;
}

// mosaic (1,H,W) -> RGB (3,H,W) in (0,1). H and W must be multiples of 8.
template <typename T>
TensorPtr<T> generator_forward(const TensorPtr<T>& mosaic, const GeneratorParams<T>& g) {
    const auto v = detail::as_nchw(mosaic->shape, "generator_forward");
    if (v.c != 1)
        throw ShapeError("generator_forward: expected a single-plane mosaic, got " +
                         shape_str(mosaic->shape));
    if (v.h % 8 != 0 || v.w % 8 != 0)
        throw ShapeError("generator_forward: H and W must be multiples of 8, got " +
                         shape_str(mosaic->shape));
    const bool sa = g.cfg.use_attention;
    const T slope = T(0.2);

    auto skip = [&](const TensorPtr<T>& enc, const ConvLayer<T>& gate) {
        if (!g.cfg.use_skip_gates) return enc;
        auto gmap = sigmoid(conv2d(enc, gate.w, gate.b, 1, Padding::Same));
        return mul(enc, gmap);
    };
    auto upsample = [&](const TensorPtr<T>& x, const ConvLayer<T>& expand) {
        return pixel_shuffle(leaky_relu(conv2d(x, expand.w, expand.b, 1, Padding::Same), slope), 2);
    };
    auto fuse = [&](const TensorPtr<T>& up, const TensorPtr<T>& gated, const ConvLayer<T>& f) {
        return leaky_relu(conv2d(concat_channels(up, gated), f.w, f.b, 1, Padding::Same), slope);
    };

    auto e1 = level_forward(leaky_relu(conv2d(mosaic, g.stem.w, g.stem.b, 1, Padding::Same), slope),
                            g.enc1, sa);
    auto e2 = level_forward(leaky_relu(conv2d(e1, g.down1.w, g.down1.b, 2, Padding::Same), slope),
                            g.enc2, sa);
    auto e3 = level_forward(leaky_relu(conv2d(e2, g.down2.w, g.down2.b, 2, Padding::Same), slope),
                            g.enc3, sa);
    auto bottom = leaky_relu(conv2d(e3, g.down3.w, g.down3.b, 2, Padding::Same), slope);

    // Two middle blocks wrapped by a short residual connection.
    auto mid = add(bottom, level_forward(level_forward(bottom, g.mid1, sa), g.mid2, sa));

    auto d3 = level_forward(fuse(upsample(mid, g.up3), skip(e3, g.gate3), g.fuse3), g.dec3, sa);
    auto d2 = level_forward(fuse(upsample(d3, g.up2), skip(e2, g.gate2), g.fuse2), g.dec2, sa);
    auto d1 = level_forward(fuse(upsample(d2, g.up1), skip(e1, g.gate1), g.fuse1), g.dec1, sa);

    return sigmoid(conv2d(d1, g.head.w, g.head.b, 1, Padding::Same));
}

// ---------------------------------------------------------------------------
// discriminator

template <typename T>
struct DiscLayer {
    ConvLayer<T> conv;
    BatchNormLayer<T> bn;
};

template <typename T>
struct DiscriminatorParams {
    ModelConfig cfg;
    ParamSet<T> all;
    std::vector<DiscLayer<T>> layers; // 7 conv3x3 stages
    SAAttentionParams<T> sa;
    ConvLayer<T> head;

    int64_t parameter_count() const { return all.count(); }
};

// Layer widths follow a doubling schedule off the first generator width:
// w0,w0,2w0,2w0,4w0,4w0,8w0 (64..512 at full scale).
inline std::vector<int> discriminator_widths(const ModelConfig& cfg) {
    const int w0 = cfg.widths[0];
    return {w0, w0, 2 * w0, 2 * w0, 4 * w0, 4 * w0, 8 * w0};
}

template <typename T>
DiscriminatorParams<T> init_discriminator(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    DiscriminatorParams<T> d;
    d.cfg = cfg;
    auto& ps = d.all;
    const auto widths = discriminator_widths(cfg);
    int in_ch = 6; // candidate and reference, channel-concatenated
    for (size_t i = 0; i < widths.size(); ++i) {
        const std::string name = "d" + std::to_string(i + 1);
        DiscLayer<T> layer;
        layer.conv = make_conv(ps, name + ".conv", widths[i], in_ch, 3, 3, seed);
        layer.bn = make_batch_norm(ps, name + ".bn", widths[i]);
        d.layers.push_back(std::move(layer));
        in_ch = widths[i];
    }
    d.sa = make_sa_attention(ps, "sa", widths.back(), cfg.attention_kernel, cfg.se_reduction, seed);
    d.head = make_conv(ps, "head", 1, widths.back(), 1, 1, seed);
    return d;
}

// Probability map over patches of the (candidate, reference) pair. Spatial
// dims halve at layers 1,3,5,7, so the map is (H/16)x(W/16).
template <typename T>
TensorPtr<T> discriminator_forward(const TensorPtr<T>& candidate, const TensorPtr<T>& reference,
                                   DiscriminatorParams<T>& d, bool training) {
    if (candidate->shape != reference->shape)
        throw ShapeError("discriminator_forward: candidate shape " + shape_str(candidate->shape) +
                         " does not match reference shape " + shape_str(reference->shape));
    const auto v = detail::as_nchw(candidate->shape, "discriminator_forward");
    if (v.c != 3) throw ShapeError("discriminator_forward: inputs must be RGB (3 channels)");
    if (v.h % 16 != 0 || v.w % 16 != 0 || v.h < 16 || v.w < 16)
        throw ShapeError("discriminator_forward: H and W must be multiples of 16");

    auto x = concat_channels(candidate, reference);
    for (size_t i = 0; i < d.layers.size(); ++i) {
        auto& layer = d.layers[i];
        const int stride = (i % 2 == 0) ? 2 : 1; // layers 1,3,5,7 downsample
        x = conv2d(x, layer.conv.w, layer.conv.b, stride, Padding::Same);
        x = batch_norm(x, layer.bn.gamma, layer.bn.beta, layer.bn.state, training);
        x = swish(x);
    }
    if (d.cfg.use_attention) x = spatial_asymmetric_attention(x, d.sa);
    return sigmoid(conv2d(x, d.head.w, d.head.b, 1, Padding::Same));
}

} // namespace sagan
