// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference verification of the autodiff engine. Runs in
// double precision with h = 1e-4; analytic gradients are compared per
// coordinate against (f(x+h) - f(x-h)) / 2h.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sagan/rng.hpp"
#include "sagan/tensor.hpp"

namespace sagan {

inline constexpr double kFdStep = 1e-4;

// Max relative error between analytic and central-difference gradients over
// the given leaves. make_loss rebuilds the scalar loss graph from the leaves'
// current data on every call. max_coords_per_leaf == 0 checks every
// coordinate; otherwise that many are sampled per leaf.
template <typename MakeLoss>
double fd_max_rel_error(const std::vector<TensorPtr<double>>& leaves, MakeLoss make_loss,
                        int max_coords_per_leaf = 0, uint64_t seed = 0, double h = kFdStep) {
    for (const auto& leaf : leaves) leaf->zero_grad();
    auto loss = make_loss();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) {
        leaf->ensure_grad();
        analytic.push_back(leaf->grad);
    }

    CounterRng rng(CounterRng::derive(seed, "fd-coords"));
    double worst = 0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = *leaves[li];
        const int64_t n = leaf.numel();
        std::vector<int64_t> coords;
        if (max_coords_per_leaf == 0 || n <= max_coords_per_leaf) {
            coords.resize(size_t(n));
            for (int64_t i = 0; i < n; ++i) coords[size_t(i)] = i;
        } else {
            for (int i = 0; i < max_coords_per_leaf; ++i)
                coords.push_back(int64_t(rng.next_index(uint64_t(n))));
        }
        for (int64_t c : coords) {
            const double saved = leaf.data[size_t(c)];
            leaf.data[size_t(c)] = saved + h;
            const double fp = make_loss()->data[0];
            leaf.data[size_t(c)] = saved - h;
            const double fm = make_loss()->data[0];
            leaf.data[size_t(c)] = saved;
            const double numeric = (fp - fm) / (2 * h);
            const double a = analytic[li][size_t(c)];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

// One named check: run(seed) builds fresh random leaves and returns the max
// relative error for that seed.
struct GradCheckScenario {
    std::string name;
    double tolerance = 1e-4;
    int default_seeds = 3; // cheap op-level checks run many more
    std::function<double(uint64_t)> run;
};

// The layer-class registry: square/asymmetric/strided convolution, pixel
// shuffle, batch norm, linear, the activations, the attention module, full
// toy generator and discriminator, and the L1 + PCL losses.
std::vector<GradCheckScenario> gradcheck_scenarios(bool toy = true);

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0;
    double tolerance = 0;
    int seeds = 0;
    bool pass = false;
};

std::vector<GradCheckReport> run_gradcheck(bool toy = true, int seed_override = 0);

} // namespace sagan
