// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/gradcheck.hpp"

#include <algorithm>

#include "sagan/losses.hpp"
#include "sagan/model.hpp"

namespace sagan {

namespace {

using T64 = TensorPtr<double>;

T64 random_leaf(std::vector<int> shape, CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    auto t = make_tensor<double>(std::move(shape), /*requires_grad=*/true);
    for (auto& v : t->data) v = rng.next_uniform(lo, hi);
    return t;
}

// Scalarize a tensor through fixed random weights so every output coordinate
// influences the loss without symmetric cancellation.
T64 weighted_loss(const T64& out, uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "loss-weights"));
    auto w = make_tensor<double>(out->shape);
    for (auto& v : w->data) v = rng.next_uniform(0.25, 1.0);
    return sum_all(mul(out, w));
}

double check_conv(uint64_t seed, int kh, int kw, int stride, Padding pad) {
    CounterRng rng(CounterRng::derive(seed, "conv"));
    auto x = random_leaf({3, 8, 8}, rng);
    auto k = random_leaf({4, 3, kh, kw}, rng);
    auto b = random_leaf({4}, rng);
    return fd_max_rel_error({x, k, b}, [&] {
        return weighted_loss(conv2d(x, k, b, stride, pad), seed);
    });
}

double check_pixel_shuffle(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "shuffle"));
    auto x = random_leaf({8, 4, 4}, rng);
    return fd_max_rel_error({x}, [&] { return weighted_loss(pixel_shuffle(x, 2), seed); });
}

double check_batch_norm(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "bn"));
    auto x = random_leaf({2, 3, 4, 4}, rng);
    auto gamma = random_leaf({3}, rng, 0.5, 1.5);
    auto beta = random_leaf({3}, rng);
    return fd_max_rel_error({x, gamma, beta}, [&] {
        BatchNormState<double> state; // fresh per forward; train mode ignores it
        return weighted_loss(batch_norm(x, gamma, beta, state, /*training=*/true), seed);
    });
}

double check_linear(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "linear"));
    auto x = random_leaf({6}, rng);
    auto w = random_leaf({4, 6}, rng);
    auto b = random_leaf({4}, rng);
    return fd_max_rel_error({x, w, b}, [&] { return weighted_loss(linear(x, w, b), seed); });
}

template <typename Op>
double check_activation(uint64_t seed, Op op, const char* label) {
    CounterRng rng(CounterRng::derive(seed, label));
    auto x = random_leaf({5, 5}, rng, -2.0, 2.0);
    return fd_max_rel_error({x}, [&] { return weighted_loss(op(x), seed); });
}

double check_pooling(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "pool"));
    auto x = random_leaf({4, 6, 6}, rng);
    return fd_max_rel_error({x}, [&] {
        auto spatial = weighted_loss(concat_channels(channel_avg(x), channel_max(x)), seed);
        auto global = weighted_loss(reshape(global_avg(x), {4, 1, 1}), seed + 1);
        return add(spatial, global);
    });
}

double check_attention(uint64_t seed, bool toy) {
    const ModelConfig cfg = toy ? ModelConfig::toy() : ModelConfig::full();
    const int channels = cfg.widths[0];
    CounterRng rng(CounterRng::derive(seed, "attention"));
    ParamSet<double> ps;
    auto params = make_sa_attention(ps, "sa", channels, cfg.attention_kernel, cfg.se_reduction,
                                    seed ^ 0x5151);
    auto x = random_leaf({channels, 6, 6}, rng);
    auto leaves = ps.tensors();
    leaves.push_back(x);
    const int coords = toy ? 0 : 4;
    return fd_max_rel_error(leaves, [&] {
        return weighted_loss(spatial_asymmetric_attention(x, params), seed);
    }, coords, seed);
}

double check_generator(uint64_t seed) {
    auto gen = init_generator<double>(ModelConfig::toy(), seed ^ 0xgen_marker);
    CounterRng rng(CounterRng::derive(seed, "gen-input"));
    auto x = random_leaf({1, 16, 16}, rng, 0.0, 1.0);
    auto leaves = gen.all.tensors();
    leaves.push_back(x);
    return fd_max_rel_error(leaves, [&] {
        return weighted_loss(generator_forward(x, gen), seed);
    }, /*max_coords_per_leaf=*/2, seed);
}

double check_discriminator(uint64_t seed) {
    auto disc = init_discriminator<double>(ModelConfig::toy(), seed ^ 0xd15c);
    CounterRng rng(CounterRng::derive(seed, "disc-input"));
    auto cand = random_leaf({3, 16, 16}, rng, 0.0, 1.0);
    auto ref = random_leaf({3, 16, 16}, rng, 0.0, 1.0);
    auto leaves = disc.all.tensors();
    leaves.push_back(cand);
    leaves.push_back(ref);
    return fd_max_rel_error(leaves, [&] {
        // Fresh BN running stats each call; train-mode output ignores them.
        for (auto& layer : disc.layers) layer.bn.state = BatchNormState<double>{};
        return weighted_loss(discriminator_forward(cand, ref, disc, /*training=*/true), seed);
    }, /*max_coords_per_leaf=*/3, seed);
}

double check_l1(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "l1"));
    auto ir = random_leaf({3, 6, 6}, rng, 0.0, 1.0);
    auto ig = random_leaf({3, 6, 6}, rng, 0.0, 1.0);
    return fd_max_rel_error({ir}, [&] { return loss_reconstruction(ir, ig); });
}

double check_pcl(uint64_t seed) {
    CounterRng rng(CounterRng::derive(seed, "pcl"));
    // Interior colours keep clear of the gamma knee, the chroma singularity
    // at neutral grays, and the clamp boundary.
    auto ir = random_leaf({3, 4, 4}, rng, 0.1, 0.9);
    auto ig = random_leaf({3, 4, 4}, rng, 0.1, 0.9);
    return fd_max_rel_error({ir, ig}, [&] { return loss_pcl(ir, ig); });
}

} // namespace

std::vector<GradCheckScenario> gradcheck_scenarios(bool toy) {
    const int asym = toy ? 5 : 9;
    std::vector<GradCheckScenario> list;
    auto add = [&](std::string name, double tol, int seeds, std::function<double(uint64_t)> fn) {
        list.push_back({std::move(name), tol, seeds, std::move(fn)});
    };
    add("conv_square", 1e-4, 20, [](uint64_t s) { return check_conv(s, 3, 3, 1, Padding::Same); });
    add("conv_asymmetric_v", 1e-4, 20,
        [asym](uint64_t s) { return check_conv(s, asym, 1, 1, Padding::Same); });
    add("conv_asymmetric_h", 1e-4, 20,
        [asym](uint64_t s) { return check_conv(s, 1, asym, 1, Padding::Same); });
    add("conv_strided", 1e-4, 20, [](uint64_t s) { return check_conv(s, 3, 3, 2, Padding::Same); });
    add("conv_valid", 1e-4, 20, [](uint64_t s) { return check_conv(s, 3, 3, 1, Padding::Valid); });
    add("pixel_shuffle", 1e-4, 20, check_pixel_shuffle);
    add("pooling", 1e-4, 20, check_pooling);
    add("batch_norm", 1e-4, 20, check_batch_norm);
    add("linear", 1e-4, 20, check_linear);
    add("sigmoid", 1e-4, 20,
        [](uint64_t s) { return check_activation(s, [](const T64& x) { return sigmoid(x); }, "sigmoid"); });
    add("leaky_relu", 1e-4, 20, [](uint64_t s) {
        return check_activation(s, [](const T64& x) { return leaky_relu(x, 0.2); }, "leaky");
    });
    add("swish", 1e-4, 20,
        [](uint64_t s) { return check_activation(s, [](const T64& x) { return swish(x); }, "swish"); });
    add("sa_attention", 1e-4, 2, [toy](uint64_t s) { return check_attention(s, toy); });
    add("generator_toy", 1e-4, 1, check_generator);
    add("discriminator_toy", 1e-4, 1, check_discriminator);
    add("loss_l1", 1e-4, 5, check_l1);
    add("loss_pcl", 1e-3, 3, check_pcl);
    return list;
}

std::vector<GradCheckReport> run_gradcheck(bool toy, int seed_override) {
    std::vector<GradCheckReport> reports;
    for (const auto& scenario : gradcheck_scenarios(toy)) {
        GradCheckReport rep;
        rep.name = scenario.name;
        rep.tolerance = scenario.tolerance;
        rep.seeds = seed_override > 0 ? seed_override : scenario.default_seeds;
        for (int s = 0; s < rep.seeds; ++s)
            rep.max_rel_err = std::max(rep.max_rel_err, scenario.run(uint64_t(s) + 1));
        rep.pass = rep.max_rel_err < rep.tolerance;
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace sagan
