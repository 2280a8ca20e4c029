// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "sagan/errors.hpp"

namespace sagan {

// Dense n-dimensional tensor participating in a dynamically built reverse-mode
// autodiff graph. Templated on the scalar type: float for model runs, double
// for gradient-check mode.
template <typename T>
class Tensor {
public:
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad; // allocated lazily; same length as data when present
    bool requires_grad = false;

    // Graph record: inputs this value was computed from, and the function
    // that routes this node's gradient into them. Cleared after backward.
    std::vector<std::shared_ptr<Tensor>> parents;
    std::function<void(Tensor&)> backward_fn;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() { grad.assign(data.size(), T(0)); }

    bool is_leaf() const { return parents.empty() && !backward_fn; }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

inline std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

inline int64_t shape_numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
    for (int d : shape)
        if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_str(shape));
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(shape);
    t->data.assign(t->numel(), T(0));
    t->requires_grad = requires_grad;
    return t;
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    auto t = make_tensor<T>(std::move(shape), requires_grad);
    if (static_cast<int64_t>(values.size()) != t->numel())
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(t->shape));
    t->data = std::move(values);
    return t;
}

template <typename T>
TensorPtr<T> scalar_tensor(T value) {
    return make_tensor<T>({1}, std::vector<T>{value});
}

// Every forward op routes its output through this check: the engine treats a
// non-finite value as an error state, not something to propagate.
template <typename T>
void ensure_finite(const Tensor<T>& t, const char* op) {
    for (const T& v : t.data) {
        if (!std::isfinite(static_cast<double>(v)))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

// Allocate the result of an op. The node records its parents only when some
// input tracks gradients; pure inference builds no graph at all.
template <typename T>
TensorPtr<T> make_op_node(std::vector<int> shape, std::vector<TensorPtr<T>> inputs) {
    auto out = make_tensor<T>(std::move(shape));
    for (const auto& p : inputs)
        if (p && p->requires_grad) out->requires_grad = true;
    if (out->requires_grad) out->parents = std::move(inputs);
    return out;
}

// Reverse-mode sweep from a scalar output. Visits nodes in exact reverse
// topological order; accumulation into shared inputs is additive. The graph
// is released afterwards unless retain_graph is set; leaf gradients persist.
template <typename T>
void backward(const TensorPtr<T>& root, bool retain_graph = false) {
    if (!root) throw ShapeError("backward: null tensor");
    if (root->numel() != 1)
        throw ShapeError("backward requires a scalar output, got shape " + shape_str(root->shape));

    // Iterative DFS post-order: every node appears after all of its parents.
    std::vector<Tensor<T>*> order;
    std::unordered_set<Tensor<T>*> seen;
    std::vector<std::pair<Tensor<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor<T>* p = node->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Tensor<T>* node : order) {
        if (node == root.get()) {
            node->ensure_grad();
            node->grad[0] = T(1);
        } else if (!node->is_leaf()) {
            node->zero_grad(); // intermediates start fresh; leaves accumulate
        } else {
            node->ensure_grad();
        }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor<T>* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
        if (!retain_graph && !node->is_leaf()) {
            node->backward_fn = nullptr;
            node->parents.clear();
        }
    }
}

template <typename T>
void zero_grads(const std::vector<TensorPtr<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

} // namespace sagan
