// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training losses: L1 reconstruction, perceptual colour loss (mean per-pixel
// CIEDE2000, differentiable via forward-mode duals inside a fused graph
// node), adversarial terms, and their weighted combination.

#pragma once

#include <array>

#include "sagan/color.hpp"
#include "sagan/ops.hpp"

namespace sagan {

inline constexpr double kLogEps = 1e-7; // clamp floor inside adversarial logs

template <typename T>
TensorPtr<T> loss_reconstruction(const TensorPtr<T>& ir, const TensorPtr<T>& ig) {
    return mean_all(abs_val(sub(ir, ig)));
}

namespace detail {

template <typename T>
void pcl_shape_check(const TensorPtr<T>& ir, const TensorPtr<T>& ig) {
    if (ir->shape != ig->shape)
        throw ShapeError("loss_pcl: shape mismatch " + shape_str(ir->shape) + " vs " +
                         shape_str(ig->shape));
    const auto v = as_nchw(ir->shape, "loss_pcl");
    if (v.c != 3) throw ShapeError("loss_pcl: inputs must be RGB (3 channels)");
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace detail

// Mean per-pixel CIEDE2000 between two RGB tensors. The backward pass pushes
// dual numbers through the straight-line colour code, so hue-branch selection
// is piecewise-constant under differentiation.
template <typename T>
TensorPtr<T> loss_pcl(const TensorPtr<T>& ir, const TensorPtr<T>& ig) {
    detail::pcl_shape_check(ir, ig);
    const auto v = detail::as_nchw(ir->shape, "loss_pcl");
    const int64_t plane = int64_t(v.h) * v.w;
    const int64_t npix = int64_t(v.n) * plane;

    auto pixel = [plane](const std::vector<T>& data, int n, int64_t i, int c) {
        return detail::clamp01(double(data[(int64_t(n) * 3 + c) * plane + i]));
    };

    auto out = make_op_node<T>({1}, {ir, ig});
    double total = 0;
    for (int n = 0; n < v.n; ++n)
        for (int64_t i = 0; i < plane; ++i) {
            const LabColor a = srgb_to_lab(pixel(ir->data, n, i, 0), pixel(ir->data, n, i, 1),
                                           pixel(ir->data, n, i, 2));
            const LabColor b = srgb_to_lab(pixel(ig->data, n, i, 0), pixel(ig->data, n, i, 1),
                                           pixel(ig->data, n, i, 2));
            total += ciede2000(a, b);
        }
    out->data[0] = T(total / double(npix));
    ensure_finite(*out, "loss_pcl");

    if (out->requires_grad) {
        out->backward_fn = [ir, ig, v, plane, npix, pixel](Tensor<T>& self) {
            using D6 = Dual<double, 6>;
            const double g = double(self.grad[0]) / double(npix);
            if (ir->requires_grad) ir->ensure_grad();
            if (ig->requires_grad) ig->ensure_grad();
            for (int n = 0; n < v.n; ++n)
                for (int64_t i = 0; i < plane; ++i) {
                    std::array<D6, 3> ca, cb;
                    for (int c = 0; c < 3; ++c) {
                        ca[c] = D6::seeded(pixel(ir->data, n, i, c), c);
                        cb[c] = D6::seeded(pixel(ig->data, n, i, c), 3 + c);
                    }
                    const auto la = srgb_to_lab(ca[0], ca[1], ca[2]);
                    const auto lb = srgb_to_lab(cb[0], cb[1], cb[2]);
                    const D6 de = ciede2000(la, lb);
                    for (int c = 0; c < 3; ++c) {
                        if (ir->requires_grad)
                            ir->grad[(int64_t(n) * 3 + c) * plane + i] += T(g * de.d[c]);
                        if (ig->requires_grad)
                            ig->grad[(int64_t(n) * 3 + c) * plane + i] += T(g * de.d[3 + c]);
                    }
                }
        };
    }
    return out;
}

// Generator term of the adversarial game: -mean(log D(fake pair)).
template <typename T>
TensorPtr<T> generator_adversarial_loss(const TensorPtr<T>& d_fake) {
    auto safe = clamp(d_fake, T(kLogEps), T(1));
    return affine(mean_all(log_val(safe)), T(-1), T(0));
}

// Discriminator term: -[mean(log D(real)) + mean(log(1 - D(fake)))].
template <typename T>
TensorPtr<T> discriminator_loss(const TensorPtr<T>& d_real, const TensorPtr<T>& d_fake) {
    auto real_term = mean_all(log_val(clamp(d_real, T(kLogEps), T(1))));
    auto fake_term = mean_all(log_val(clamp(affine(d_fake, T(-1), T(1)), T(kLogEps), T(1))));
    return affine(add(real_term, fake_term), T(-1), T(0));
}

// The one arithmetic path for the total: l_r + l_c + lambda_g * l_g. Both the
// graph node and any log verification must call this.
template <typename T>
inline T combine_losses(T l_r, T l_c, T l_g, T lambda_g) {
    const T base = l_r + l_c;
    const T weighted = lambda_g * l_g;
    return base + weighted;
}

template <typename T>
struct LossBreakdown {
    T l_r{}, l_c{}, l_g{}, l_total{};
    T lambda_g{};
};

// Weighted sum node over the three scalar loss terms.
template <typename T>
TensorPtr<T> loss_total(const TensorPtr<T>& l_r, const TensorPtr<T>& l_c, const TensorPtr<T>& l_g,
                        T lambda_g) {
    for (const auto& [node, name] :
         {std::pair{l_r, "l_r"}, std::pair{l_c, "l_c"}, std::pair{l_g, "l_g"}}) {
        if (node->numel() != 1)
            throw ShapeError(std::string("loss_total: ") + name + " must be scalar");
        if (!std::isfinite(double(node->data[0])))
            throw NumericError(std::string("loss_total: non-finite component ") + name);
    }
    auto out = make_op_node<T>({1}, {l_r, l_c, l_g});
    out->data[0] = combine_losses(l_r->data[0], l_c->data[0], l_g->data[0], lambda_g);
    ensure_finite(*out, "loss_total");
    if (out->requires_grad) {
        out->backward_fn = [l_r, l_c, l_g, lambda_g](Tensor<T>& self) {
            const T g = self.grad[0];
            if (l_r->requires_grad) {
                l_r->ensure_grad();
                l_r->grad[0] += g;
            }
            if (l_c->requires_grad) {
                l_c->ensure_grad();
                l_c->grad[0] += g;
            }
            if (l_g->requires_grad) {
                l_g->ensure_grad();
                l_g->grad[0] += lambda_g * g;
            }
        };
    }
    return out;
}

} // namespace sagan
