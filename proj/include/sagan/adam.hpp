// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "sagan/tensor.hpp"

namespace sagan {

template <typename T>
struct AdamConfig {
    T lr = T(5e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.99);
    T eps = T(1e-8);
};

// First/second moment buffers per parameter plus the shared step counter.
template <typename T>
struct AdamState {
    AdamConfig<T> cfg;
    int64_t step = 0;
    std::vector<std::vector<T>> m, v;

    void init(const std::vector<TensorPtr<T>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p->data.size(), T(0));
            v.emplace_back(p->data.size(), T(0));
        }
        step = 0;
    }
};

// Standard bias-corrected Adam update. A parameter with no gradient buffer is
// treated as having zero gradient; a non-finite gradient raises before any
// parameter is touched so the caller still holds the last good state.
template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params, AdamState<T>& state) {
    if (state.m.size() != params.size())
        throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (state.m[i].size() != p->data.size())
            throw ShapeError("adam_step: moment buffer size mismatch for parameter " +
                             std::to_string(i));
        if (!p->grad.empty() && p->grad.size() != p->data.size())
            throw ShapeError("adam_step: gradient size mismatch for parameter " + std::to_string(i));
        for (const T g : p->grad)
            if (!std::isfinite(double(g))) throw NumericError("adam_step: non-finite gradient");
    }

    state.step += 1;
    const auto& c = state.cfg;
    const T bc1 = T(1) - std::pow(c.beta1, T(state.step));
    const T bc2 = T(1) - std::pow(c.beta2, T(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.data.size(); ++j) {
            const T g = p.grad.empty() ? T(0) : p.grad[j];
            m[j] = c.beta1 * m[j] + (T(1) - c.beta1) * g;
            v[j] = c.beta2 * v[j] + (T(1) - c.beta2) * g * g;
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            p.data[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

} // namespace sagan
