// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Named-parameter registry and layer builders. Initialization draws every
// tensor from a counter RNG keyed by (seed, parameter name), so values are
// independent of construction order and reproducible per seed.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sagan/ops.hpp"
#include "sagan/rng.hpp"
#include "sagan/tensor.hpp"

namespace sagan {

template <typename T>
struct ParamSet {
    std::vector<std::pair<std::string, TensorPtr<T>>> items;

    TensorPtr<T> add(const std::string& name, std::vector<int> shape) {
        for (const auto& [n, t] : items)
            if (n == name) throw ShapeError("duplicate parameter name: " + name);
        auto t = make_tensor<T>(std::move(shape), /*requires_grad=*/true);
        items.emplace_back(name, t);
        return t;
    }

    TensorPtr<T> find(const std::string& name) const {
        for (const auto& [n, t] : items)
            if (n == name) return t;
        throw ShapeError("unknown parameter: " + name);
    }

    std::vector<TensorPtr<T>> tensors() const {
        std::vector<TensorPtr<T>> out;
        out.reserve(items.size());
        for (const auto& [n, t] : items) out.push_back(t);
        return out;
    }

    int64_t count() const {
        int64_t total = 0;
        for (const auto& [n, t] : items) total += t->numel();
        return total;
    }
};

// Fan-in-scaled uniform init: bound = sqrt(6 / fan_in).
template <typename T>
void fill_fan_in_uniform(Tensor<T>& t, int fan_in, uint64_t seed, const std::string& name) {
    CounterRng rng(CounterRng::derive(seed, name));
    const double bound = std::sqrt(6.0 / double(fan_in));
    for (auto& v : t.data) v = T(rng.next_uniform(-bound, bound));
}

template <typename T>
struct ConvLayer {
    TensorPtr<T> w, b;
};

template <typename T>
ConvLayer<T> make_conv(ParamSet<T>& ps, const std::string& name, int co, int ci, int kh, int kw,
                       uint64_t seed) {
    ConvLayer<T> layer;
    layer.w = ps.add(name + ".w", {co, ci, kh, kw});
    layer.b = ps.add(name + ".b", {co});
    fill_fan_in_uniform(*layer.w, ci * kh * kw, seed, name + ".w");
    return layer; // bias stays zero
}

template <typename T>
struct LinearLayer {
    TensorPtr<T> w, b;
};

template <typename T>
LinearLayer<T> make_linear(ParamSet<T>& ps, const std::string& name, int m, int n, uint64_t seed) {
    LinearLayer<T> layer;
    layer.w = ps.add(name + ".w", {m, n});
    layer.b = ps.add(name + ".b", {m});
    fill_fan_in_uniform(*layer.w, n, seed, name + ".w");
    return layer;
}

template <typename T>
struct BatchNormLayer {
    TensorPtr<T> gamma, beta;
    BatchNormState<T> state;
};

template <typename T>
BatchNormLayer<T> make_batch_norm(ParamSet<T>& ps, const std::string& name, int channels) {
    BatchNormLayer<T> layer;
    layer.gamma = ps.add(name + ".gamma", {channels});
    layer.beta = ps.add(name + ".beta", {channels});
    std::fill(layer.gamma->data.begin(), layer.gamma->data.end(), T(1));
    return layer;
}

} // namespace sagan
