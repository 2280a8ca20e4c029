// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Primitive differentiable operations. Ops accept rank-3 (C,H,W) feature maps
// or rank-4 (N,C,H,W) batches and preserve the input rank. Reductions run in
// a fixed sequential order per output element so results are bitwise
// reproducible run to run.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sagan/tensor.hpp"

namespace sagan {

enum class Padding { Same, Valid };

namespace detail {

inline int floordiv(int a, int b) {
    int q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
inline int ceildiv(int a, int b) { return floordiv(a + b - 1, b); }

struct View4 {
    int n, c, h, w;
    bool batched;
};

inline View4 as_nchw(const std::vector<int>& shape, const char* op) {
    if (shape.size() == 3) return {1, shape[0], shape[1], shape[2], false};
    if (shape.size() == 4) return {shape[0], shape[1], shape[2], shape[3], true};
    throw ShapeError(std::string(op) + ": expected rank-3 or rank-4 input, got " + shape_str(shape));
}

inline std::vector<int> with_chw(const View4& v, int c, int h, int w) {
    if (v.batched) return {v.n, c, h, w};
    return {c, h, w};
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& kernel, const TensorPtr<T>& bias,
                    int stride = 1, Padding padding = Padding::Same) {
    using namespace detail;
    const View4 v = as_nchw(x->shape, "conv2d");
    if (kernel->shape.size() != 4)
        throw ShapeError("conv2d: kernel must be rank-4 (Cout,Cin,kh,kw), got " + shape_str(kernel->shape));
    const int co = kernel->shape[0], ci = kernel->shape[1];
    const int kh = kernel->shape[2], kw = kernel->shape[3];
    if (ci != v.c)
        throw ShapeError("conv2d: input has " + std::to_string(v.c) + " channels but kernel expects " +
                         std::to_string(ci));
    if (bias->shape != std::vector<int>{co})
        throw ShapeError("conv2d: bias shape " + shape_str(bias->shape) + " does not match Cout=" +
                         std::to_string(co));
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");

    int oh, ow, pt, pl;
    if (padding == Padding::Same) {
        oh = (v.h + stride - 1) / stride;
        ow = (v.w + stride - 1) / stride;
        pt = std::max(0, (oh - 1) * stride + kh - v.h) / 2;
        pl = std::max(0, (ow - 1) * stride + kw - v.w) / 2;
    } else {
        if (v.h < kh || v.w < kw)
            throw ShapeError("conv2d: valid padding needs input >= kernel extent");
        oh = (v.h - kh) / stride + 1;
        ow = (v.w - kw) / stride + 1;
        pt = pl = 0;
    }

    auto out = make_op_node<T>(with_chw(v, co, oh, ow), {x, kernel, bias});

    const int64_t xcs = int64_t(v.h) * v.w, xns = int64_t(v.c) * xcs;
    const int64_t ocs = int64_t(oh) * ow, ons = int64_t(co) * ocs;
    const int H = v.h, W = v.w, s = stride;

    auto row_range = [s](int pad, int kpos, int in_extent, int out_extent) {
        int lo = std::max(0, detail::ceildiv(pad - kpos, s));
        int hi = std::min(out_extent, detail::floordiv(in_extent - 1 + pad - kpos, s) + 1);
        return std::pair<int, int>(lo, std::max(lo, hi));
    };

    const T* xd = x->data.data();
    const T* kd = kernel->data.data();
    T* od = out->data.data();
    for (int n = 0; n < v.n; ++n) {
        for (int c = 0; c < co; ++c) {
            T* oplane = od + n * ons + c * ocs;
            std::fill(oplane, oplane + ocs, bias->data[c]);
            for (int ic = 0; ic < ci; ++ic) {
                const T* xplane = xd + n * xns + ic * xcs;
                for (int ky = 0; ky < kh; ++ky) {
                    auto [oy0, oy1] = row_range(pt, ky, H, oh);
                    for (int kx = 0; kx < kw; ++kx) {
                        auto [ox0, ox1] = row_range(pl, kx, W, ow);
                        const T wv = kd[((int64_t(c) * ci + ic) * kh + ky) * kw + kx];
                        for (int oy = oy0; oy < oy1; ++oy) {
                            const T* irow = xplane + int64_t(oy * s + ky - pt) * W + (kx - pl);
                            T* orow = oplane + int64_t(oy) * ow;
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox * s];
                        }
                    }
                }
            }
        }
    }
    ensure_finite(*out, "conv2d");

    if (out->requires_grad) {
        out->backward_fn = [x, kernel, bias, v, co, ci, kh, kw, s, pt, pl, oh, ow, xcs, xns, ocs,
                            ons, row_range](Tensor<T>& self) {
            const T* g = self.grad.data();
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int n = 0; n < v.n; ++n)
                    for (int c = 0; c < co; ++c) {
                        const T* gp = g + n * ons + c * ocs;
                        T acc = 0;
                        for (int64_t i = 0; i < ocs; ++i) acc += gp[i];
                        bias->grad[c] += acc;
                    }
            }
            if (kernel->requires_grad) {
                kernel->ensure_grad();
                for (int n = 0; n < v.n; ++n)
                    for (int c = 0; c < co; ++c) {
                        const T* gplane = g + n * ons + c * ocs;
                        for (int ic = 0; ic < ci; ++ic) {
                            const T* xplane = x->data.data() + n * xns + ic * xcs;
                            for (int ky = 0; ky < kh; ++ky) {
                                auto [oy0, oy1] = row_range(pt, ky, v.h, oh);
                                for (int kx = 0; kx < kw; ++kx) {
                                    auto [ox0, ox1] = row_range(pl, kx, v.w, ow);
                                    T acc = 0;
                                    for (int oy = oy0; oy < oy1; ++oy) {
                                        const T* irow = xplane + int64_t(oy * s + ky - pt) * v.w + (kx - pl);
                                        const T* grow = gplane + int64_t(oy) * ow;
                                        for (int ox = ox0; ox < ox1; ++ox) acc += grow[ox] * irow[ox * s];
                                    }
                                    kernel->grad[((int64_t(c) * ci + ic) * kh + ky) * kw + kx] += acc;
                                }
                            }
                        }
                    }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                for (int n = 0; n < v.n; ++n)
                    for (int c = 0; c < co; ++c) {
                        const T* gplane = g + n * ons + c * ocs;
                        for (int ic = 0; ic < ci; ++ic) {
                            T* gxplane = x->grad.data() + n * xns + ic * xcs;
                            for (int ky = 0; ky < kh; ++ky) {
                                auto [oy0, oy1] = row_range(pt, ky, v.h, oh);
                                for (int kx = 0; kx < kw; ++kx) {
                                    auto [ox0, ox1] = row_range(pl, kx, v.w, ow);
                                    const T wv =
                                        kernel->data[((int64_t(c) * ci + ic) * kh + ky) * kw + kx];
                                    for (int oy = oy0; oy < oy1; ++oy) {
                                        T* gxrow = gxplane + int64_t(oy * s + ky - pt) * v.w + (kx - pl);
                                        const T* grow = gplane + int64_t(oy) * ow;
                                        for (int ox = ox0; ox < ox1; ++ox) gxrow[ox * s] += wv * grow[ox];
                                    }
                                }
                            }
                        }
                    }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// pooling suite

// Mean across channels: (N,)C,H,W -> (N,)1,H,W.
template <typename T>
TensorPtr<T> channel_avg(const TensorPtr<T>& x) {
    const auto v = detail::as_nchw(x->shape, "channel_avg");
    auto out = make_op_node<T>(detail::with_chw(v, 1, v.h, v.w), {x});
    const int64_t plane = int64_t(v.h) * v.w;
    const T inv = T(1) / T(v.c);
    for (int n = 0; n < v.n; ++n) {
        const T* xp = x->data.data() + n * v.c * plane;
        T* op = out->data.data() + n * plane;
        for (int64_t i = 0; i < plane; ++i) {
            T acc = 0;
            for (int c = 0; c < v.c; ++c) acc += xp[c * plane + i];
            op[i] = acc * inv;
        }
    }
    ensure_finite(*out, "channel_avg");
    if (out->requires_grad) {
        out->backward_fn = [x, v, plane, inv](Tensor<T>& self) {
            x->ensure_grad();
            for (int n = 0; n < v.n; ++n) {
                const T* gp = self.grad.data() + n * plane;
                T* gx = x->grad.data() + n * v.c * plane;
                for (int c = 0; c < v.c; ++c)
                    for (int64_t i = 0; i < plane; ++i) gx[c * plane + i] += gp[i] * inv;
            }
        };
    }
    return out;
}

// Max across channels: (N,)C,H,W -> (N,)1,H,W. Ties route to the lowest
// channel index so the backward pass is deterministic.
template <typename T>
TensorPtr<T> channel_max(const TensorPtr<T>& x) {
    const auto v = detail::as_nchw(x->shape, "channel_max");
    auto out = make_op_node<T>(detail::with_chw(v, 1, v.h, v.w), {x});
    const int64_t plane = int64_t(v.h) * v.w;
    std::vector<int32_t> argmax(size_t(v.n) * plane);
    for (int n = 0; n < v.n; ++n) {
        const T* xp = x->data.data() + n * v.c * plane;
        T* op = out->data.data() + n * plane;
        int32_t* am = argmax.data() + n * plane;
        for (int64_t i = 0; i < plane; ++i) {
            T best = xp[i];
            int32_t bc = 0;
            for (int c = 1; c < v.c; ++c) {
                const T cand = xp[c * plane + i];
                if (cand > best) {
                    best = cand;
                    bc = c;
                }
            }
            op[i] = best;
            am[i] = bc;
        }
    }
    ensure_finite(*out, "channel_max");
    if (out->requires_grad) {
        out->backward_fn = [x, v, plane, argmax = std::move(argmax)](Tensor<T>& self) {
            x->ensure_grad();
            for (int n = 0; n < v.n; ++n) {
                const T* gp = self.grad.data() + n * plane;
                const int32_t* am = argmax.data() + n * plane;
                T* gx = x->grad.data() + n * v.c * plane;
                for (int64_t i = 0; i < plane; ++i) gx[am[i] * plane + i] += gp[i];
            }
        };
    }
    return out;
}

// Mean over the spatial extent: (N,)C,H,W -> (N,)C.
template <typename T>
TensorPtr<T> global_avg(const TensorPtr<T>& x) {
    const auto v = detail::as_nchw(x->shape, "global_avg");
    std::vector<int> oshape = v.batched ? std::vector<int>{v.n, v.c} : std::vector<int>{v.c};
    auto out = make_op_node<T>(oshape, {x});
    const int64_t plane = int64_t(v.h) * v.w;
    const T inv = T(1) / T(plane);
    for (int n = 0; n < v.n; ++n)
        for (int c = 0; c < v.c; ++c) {
            const T* xp = x->data.data() + (n * v.c + c) * plane;
            T acc = 0;
            for (int64_t i = 0; i < plane; ++i) acc += xp[i];
            out->data[n * v.c + c] = acc * inv;
        }
    ensure_finite(*out, "global_avg");
    if (out->requires_grad) {
        out->backward_fn = [x, v, plane, inv](Tensor<T>& self) {
            x->ensure_grad();
            for (int n = 0; n < v.n; ++n)
                for (int c = 0; c < v.c; ++c) {
                    const T gv = self.grad[n * v.c + c] * inv;
                    T* gx = x->grad.data() + (n * v.c + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) gx[i] += gv;
                }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// pixel shuffle: (N,)C*r^2,H,W -> (N,)C,rH,rW
// out(c, r*y+dy, r*x+dx) = in(c*r^2 + dy*r + dx, y, x)

template <typename T>
TensorPtr<T> pixel_shuffle(const TensorPtr<T>& x, int r) {
    const auto v = detail::as_nchw(x->shape, "pixel_shuffle");
    if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
    if (v.c % (r * r) != 0)
        throw ShapeError("pixel_shuffle: " + std::to_string(v.c) + " channels not divisible by r^2=" +
                         std::to_string(r * r));
    const int oc = v.c / (r * r), oh = v.h * r, ow = v.w * r;
    auto out = make_op_node<T>(detail::with_chw(v, oc, oh, ow), {x});
    const int64_t iplane = int64_t(v.h) * v.w, oplane = int64_t(oh) * ow;
    for (int n = 0; n < v.n; ++n)
        for (int c = 0; c < oc; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    const T* ip = x->data.data() + (int64_t(n) * v.c + c * r * r + dy * r + dx) * iplane;
                    T* op = out->data.data() + (int64_t(n) * oc + c) * oplane;
                    for (int y = 0; y < v.h; ++y) {
                        T* orow = op + int64_t(r * y + dy) * ow + dx;
                        const T* irow = ip + int64_t(y) * v.w;
                        for (int xw = 0; xw < v.w; ++xw) orow[int64_t(xw) * r] = irow[xw];
                    }
                }
    if (out->requires_grad) {
        out->backward_fn = [x, v, r, oc, oh, ow, iplane, oplane](Tensor<T>& self) {
            x->ensure_grad();
            for (int n = 0; n < v.n; ++n)
                for (int c = 0; c < oc; ++c)
                    for (int dy = 0; dy < r; ++dy)
                        for (int dx = 0; dx < r; ++dx) {
                            T* gx = x->grad.data() + (int64_t(n) * v.c + c * r * r + dy * r + dx) * iplane;
                            const T* gp = self.grad.data() + (int64_t(n) * oc + c) * oplane;
                            for (int y = 0; y < v.h; ++y) {
                                const T* grow = gp + int64_t(r * y + dy) * ow + dx;
                                T* gxrow = gx + int64_t(y) * v.w;
                                for (int xw = 0; xw < v.w; ++xw) gxrow[xw] += grow[int64_t(xw) * r];
                            }
                        }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// elementwise activations

namespace detail {

template <typename T, typename Fwd, typename Bwd>
TensorPtr<T> unary_op(const TensorPtr<T>& x, Fwd fwd, Bwd bwd, const char* name) {
    auto out = make_op_node<T>(x->shape, {x});
    const int64_t n = x->numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = fwd(x->data[i]);
    ensure_finite(*out, name);
    if (out->requires_grad) {
        out->backward_fn = [x, bwd, n](Tensor<T>& self) {
            x->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                x->grad[i] += self.grad[i] * bwd(x->data[i], self.data[i]);
        };
    }
    return out;
}

template <typename T>
T stable_sigmoid(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

} // namespace detail

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& x) {
    return detail::unary_op(
        x, [](T v) { return detail::stable_sigmoid(v); },
        [](T, T y) { return y * (T(1) - y); }, "sigmoid");
}

template <typename T>
TensorPtr<T> leaky_relu(const TensorPtr<T>& x, T slope = T(0.2)) {
    return detail::unary_op(
        x, [slope](T v) { return v >= T(0) ? v : slope * v; },
        [slope](T v, T) { return v >= T(0) ? T(1) : slope; }, "leaky_relu");
}

template <typename T>
TensorPtr<T> swish(const TensorPtr<T>& x) {
    return detail::unary_op(
        x, [](T v) { return v * detail::stable_sigmoid(v); },
        [](T v, T) {
            const T s = detail::stable_sigmoid(v);
            return s * (T(1) + v * (T(1) - s));
        },
        "swish");
}

template <typename T>
TensorPtr<T> abs_val(const TensorPtr<T>& x) {
    return detail::unary_op(
        x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); }, "abs");
}

template <typename T>
TensorPtr<T> log_val(const TensorPtr<T>& x) {
    return detail::unary_op(
        x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; }, "log");
}

// Clamp with pass-through gradient strictly inside the interval.
template <typename T>
TensorPtr<T> clamp(const TensorPtr<T>& x, T lo, T hi) {
    return detail::unary_op(
        x, [lo, hi](T v) { return std::min(hi, std::max(lo, v)); },
        [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); }, "clamp");
}

// a*x + b, elementwise with scalar coefficients.
template <typename T>
TensorPtr<T> affine(const TensorPtr<T>& x, T a, T b) {
    return detail::unary_op(
        x, [a, b](T v) { return a * v + b; }, [a](T, T) { return a; }, "affine");
}

// ---------------------------------------------------------------------------
// binary elementwise

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
        throw ShapeError("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_op_node<T>(a->shape, {a, b});
    const int64_t n = a->numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
    ensure_finite(*out, "add");
    if (out->requires_grad) {
        out->backward_fn = [a, b, n](Tensor<T>& self) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < n; ++i) a->grad[i] += self.grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < n; ++i) b->grad[i] += self.grad[i];
            }
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
        throw ShapeError("sub: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_op_node<T>(a->shape, {a, b});
    const int64_t n = a->numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[i];
    ensure_finite(*out, "sub");
    if (out->requires_grad) {
        out->backward_fn = [a, b, n](Tensor<T>& self) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t i = 0; i < n; ++i) a->grad[i] += self.grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t i = 0; i < n; ++i) b->grad[i] -= self.grad[i];
            }
        };
    }
    return out;
}

namespace detail {

struct BroadcastPlan {
    std::vector<int> out_shape;
    std::vector<int64_t> a_stride, b_stride; // 0 marks a broadcast dim
};

inline BroadcastPlan broadcast_plan(const std::vector<int>& a, const std::vector<int>& b,
                                    const char* op) {
    const size_t rank = std::max(a.size(), b.size());
    BroadcastPlan plan;
    plan.out_shape.resize(rank);
    std::vector<int> ae(rank, 1), be(rank, 1);
    std::copy(a.begin(), a.end(), ae.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), be.begin() + (rank - b.size()));
    for (size_t i = 0; i < rank; ++i) {
        if (ae[i] != be[i] && ae[i] != 1 && be[i] != 1)
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                             shape_str(b));
        plan.out_shape[i] = std::max(ae[i], be[i]);
    }
    auto strides = [&](const std::vector<int>& ext) {
        std::vector<int64_t> st(rank, 0);
        int64_t acc = 1;
        for (size_t i = rank; i-- > 0;) {
            st[i] = (ext[i] == 1) ? 0 : acc;
            acc *= ext[i];
        }
        return st;
    };
    plan.a_stride = strides(ae);
    plan.b_stride = strides(be);
    return plan;
}

// Walk every output element of a broadcast op in row-major order, invoking
// fn(out_index, a_index, b_index).
template <typename Fn>
void broadcast_walk(const BroadcastPlan& plan, Fn fn) {
    const size_t rank = plan.out_shape.size();
    std::vector<int> idx(rank, 0);
    const int64_t total = shape_numel(plan.out_shape);
    int64_t ia = 0, ib = 0;
    for (int64_t io = 0; io < total; ++io) {
        fn(io, ia, ib);
        for (size_t d = rank; d-- > 0;) {
            idx[d]++;
            ia += plan.a_stride[d];
            ib += plan.b_stride[d];
            if (idx[d] < plan.out_shape[d]) break;
            ia -= int64_t(idx[d]) * plan.a_stride[d];
            ib -= int64_t(idx[d]) * plan.b_stride[d];
            idx[d] = 0;
        }
    }
}

} // namespace detail

// Elementwise product with trailing-dim broadcasting (either operand may have
// size-1 dims). The gradient of a broadcast operand sums over the expanded
// dims, accumulated in output row-major order.
template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape == b->shape) {
        auto out = make_op_node<T>(a->shape, {a, b});
        const int64_t n = a->numel();
        for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
        ensure_finite(*out, "mul");
        if (out->requires_grad) {
            out->backward_fn = [a, b, n](Tensor<T>& self) {
                if (a->requires_grad) {
                    a->ensure_grad();
                    for (int64_t i = 0; i < n; ++i) a->grad[i] += self.grad[i] * b->data[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    for (int64_t i = 0; i < n; ++i) b->grad[i] += self.grad[i] * a->data[i];
                }
            };
        }
        return out;
    }
    auto plan = detail::broadcast_plan(a->shape, b->shape, "mul");
    auto out = make_op_node<T>(plan.out_shape, {a, b});
    detail::broadcast_walk(plan, [&](int64_t io, int64_t ia, int64_t ib) {
        out->data[io] = a->data[ia] * b->data[ib];
    });
    ensure_finite(*out, "mul");
    if (out->requires_grad) {
        out->backward_fn = [a, b, plan](Tensor<T>& self) {
            if (a->requires_grad) a->ensure_grad();
            if (b->requires_grad) b->ensure_grad();
            detail::broadcast_walk(plan, [&](int64_t io, int64_t ia, int64_t ib) {
                if (a->requires_grad) a->grad[ia] += self.grad[io] * b->data[ib];
                if (b->requires_grad) b->grad[ib] += self.grad[io] * a->data[ia];
            });
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear: y = W x + b, with W of shape (M,N). Accepts (N) or batched (B,N).

template <typename T>
TensorPtr<T> linear(const TensorPtr<T>& x, const TensorPtr<T>& weight, const TensorPtr<T>& bias) {
    if (weight->shape.size() != 2)
        throw ShapeError("linear: weight must be rank-2 (M,N), got " + shape_str(weight->shape));
    const int m = weight->shape[0], nin = weight->shape[1];
    int batch;
    bool batched;
    if (x->shape.size() == 1) {
        batch = 1;
        batched = false;
    } else if (x->shape.size() == 2) {
        batch = x->shape[0];
        batched = true;
    } else {
        throw ShapeError("linear: input must be rank-1 or rank-2, got " + shape_str(x->shape));
    }
    const int xin = x->shape.back();
    if (xin != nin)
        throw ShapeError("linear: input size " + std::to_string(xin) + " does not match weight N=" +
                         std::to_string(nin));
    if (bias->shape != std::vector<int>{m})
        throw ShapeError("linear: bias shape " + shape_str(bias->shape) + " does not match M=" +
                         std::to_string(m));

    auto out = make_op_node<T>(batched ? std::vector<int>{batch, m} : std::vector<int>{m},
                               {x, weight, bias});
    for (int bidx = 0; bidx < batch; ++bidx) {
        const T* xp = x->data.data() + int64_t(bidx) * nin;
        T* op = out->data.data() + int64_t(bidx) * m;
        for (int i = 0; i < m; ++i) {
            const T* wrow = weight->data.data() + int64_t(i) * nin;
            T acc = bias->data[i];
            for (int j = 0; j < nin; ++j) acc += wrow[j] * xp[j];
            op[i] = acc;
        }
    }
    ensure_finite(*out, "linear");
    if (out->requires_grad) {
        out->backward_fn = [x, weight, bias, batch, m, nin](Tensor<T>& self) {
            for (int bidx = 0; bidx < batch; ++bidx) {
                const T* gp = self.grad.data() + int64_t(bidx) * m;
                const T* xp = x->data.data() + int64_t(bidx) * nin;
                if (bias->requires_grad) {
                    bias->ensure_grad();
                    for (int i = 0; i < m; ++i) bias->grad[i] += gp[i];
                }
                if (weight->requires_grad) {
                    weight->ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        T* gw = weight->grad.data() + int64_t(i) * nin;
                        const T gv = gp[i];
                        for (int j = 0; j < nin; ++j) gw[j] += gv * xp[j];
                    }
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    T* gx = x->grad.data() + int64_t(bidx) * nin;
                    for (int i = 0; i < m; ++i) {
                        const T* wrow = weight->data.data() + int64_t(i) * nin;
                        const T gv = gp[i];
                        for (int j = 0; j < nin; ++j) gx[j] += gv * wrow[j];
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch normalization

template <typename T>
struct BatchNormState {
    std::vector<T> running_mean, running_var;
    bool initialized = false;
};

// Train mode normalizes by the batch statistics per channel (biased variance)
// and folds them into the running estimates with the given momentum; the very
// first batch seeds the running statistics directly. Eval mode requires
// populated statistics.
template <typename T>
TensorPtr<T> batch_norm(const TensorPtr<T>& x, const TensorPtr<T>& gamma, const TensorPtr<T>& beta,
                        BatchNormState<T>& state, bool training, T eps = T(1e-5),
                        T momentum = T(0.1)) {
    const auto v = detail::as_nchw(x->shape, "batch_norm");
    if (gamma->shape != std::vector<int>{v.c} || beta->shape != std::vector<int>{v.c})
        throw ShapeError("batch_norm: gamma/beta must have shape [" + std::to_string(v.c) + "]");
    if (!training && !state.initialized)
        throw StateError("batch_norm: eval mode requires populated running statistics");

    const int64_t plane = int64_t(v.h) * v.w;
    const int64_t per_channel = int64_t(v.n) * plane;
    std::vector<T> mean(v.c), inv_std(v.c);

    if (training) {
        for (int c = 0; c < v.c; ++c) {
            T sum = 0;
            for (int n = 0; n < v.n; ++n) {
                const T* xp = x->data.data() + (int64_t(n) * v.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) sum += xp[i];
            }
            const T mu = sum / T(per_channel);
            T var_sum = 0;
            for (int n = 0; n < v.n; ++n) {
                const T* xp = x->data.data() + (int64_t(n) * v.c + c) * plane;
                for (int64_t i = 0; i < plane; ++i) {
                    const T d = xp[i] - mu;
                    var_sum += d * d;
                }
            }
            mean[c] = mu;
            inv_std[c] = T(1) / std::sqrt(var_sum / T(per_channel) + eps);
        }
        if (!state.initialized) {
            state.running_mean = mean;
            state.running_var.resize(v.c);
            for (int c = 0; c < v.c; ++c)
                state.running_var[c] = T(1) / (inv_std[c] * inv_std[c]) - eps;
            state.initialized = true;
        } else {
            for (int c = 0; c < v.c; ++c) {
                const T var_c = T(1) / (inv_std[c] * inv_std[c]) - eps;
                state.running_mean[c] = (T(1) - momentum) * state.running_mean[c] + momentum * mean[c];
                state.running_var[c] = (T(1) - momentum) * state.running_var[c] + momentum * var_c;
            }
        }
    } else {
        for (int c = 0; c < v.c; ++c) {
            mean[c] = state.running_mean[c];
            inv_std[c] = T(1) / std::sqrt(state.running_var[c] + eps);
        }
    }

    auto out = make_op_node<T>(x->shape, {x, gamma, beta});
    for (int n = 0; n < v.n; ++n)
        for (int c = 0; c < v.c; ++c) {
            const T* xp = x->data.data() + (int64_t(n) * v.c + c) * plane;
            T* op = out->data.data() + (int64_t(n) * v.c + c) * plane;
            const T g = gamma->data[c], b = beta->data[c], mu = mean[c], is = inv_std[c];
            for (int64_t i = 0; i < plane; ++i) op[i] = g * (xp[i] - mu) * is + b;
        }
    ensure_finite(*out, "batch_norm");

    if (out->requires_grad) {
        out->backward_fn = [x, gamma, beta, v, plane, per_channel, mean = std::move(mean),
                            inv_std = std::move(inv_std), training](Tensor<T>& self) {
            if (beta->requires_grad) beta->ensure_grad();
            if (gamma->requires_grad) gamma->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            for (int c = 0; c < v.c; ++c) {
                const T mu = mean[c], is = inv_std[c];
                T sum_g = 0, sum_gxh = 0;
                for (int n = 0; n < v.n; ++n) {
                    const T* gp = self.grad.data() + (int64_t(n) * v.c + c) * plane;
                    const T* xp = x->data.data() + (int64_t(n) * v.c + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        sum_g += gp[i];
                        sum_gxh += gp[i] * (xp[i] - mu) * is;
                    }
                }
                if (beta->requires_grad) beta->grad[c] += sum_g;
                if (gamma->requires_grad) gamma->grad[c] += sum_gxh;
                if (x->requires_grad) {
                    const T g = gamma->data[c];
                    const T inv_m = T(1) / T(per_channel);
                    for (int n = 0; n < v.n; ++n) {
                        const T* gp = self.grad.data() + (int64_t(n) * v.c + c) * plane;
                        const T* xp = x->data.data() + (int64_t(n) * v.c + c) * plane;
                        T* gx = x->grad.data() + (int64_t(n) * v.c + c) * plane;
                        if (training) {
                            for (int64_t i = 0; i < plane; ++i) {
                                const T xh = (xp[i] - mu) * is;
                                gx[i] += g * is * (gp[i] - inv_m * sum_g - xh * inv_m * sum_gxh);
                            }
                        } else {
                            for (int64_t i = 0; i < plane; ++i) gx[i] += g * is * gp[i];
                        }
                    }
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
TensorPtr<T> reshape(const TensorPtr<T>& x, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != x->numel())
        throw ShapeError("reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(new_shape));
    auto out = make_op_node<T>(std::move(new_shape), {x});
    out->data = x->data;
    if (out->requires_grad) {
        out->backward_fn = [x](Tensor<T>& self) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self.grad[i];
        };
    }
    return out;
}

// Concatenate along the channel axis (axis 0 for rank-3, axis 1 for rank-4).
template <typename T>
TensorPtr<T> concat_channels(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    const auto va = detail::as_nchw(a->shape, "concat_channels");
    const auto vb = detail::as_nchw(b->shape, "concat_channels");
    if (va.n != vb.n || va.h != vb.h || va.w != vb.w || va.batched != vb.batched)
        throw ShapeError("concat_channels: incompatible shapes " + shape_str(a->shape) + " and " +
                         shape_str(b->shape));
    const int oc = va.c + vb.c;
    auto out = make_op_node<T>(detail::with_chw(va, oc, va.h, va.w), {a, b});
    const int64_t plane = int64_t(va.h) * va.w;
    for (int n = 0; n < va.n; ++n) {
        std::copy_n(a->data.data() + int64_t(n) * va.c * plane, va.c * plane,
                    out->data.data() + int64_t(n) * oc * plane);
        std::copy_n(b->data.data() + int64_t(n) * vb.c * plane, vb.c * plane,
                    out->data.data() + int64_t(n) * oc * plane + va.c * plane);
    }
    if (out->requires_grad) {
        out->backward_fn = [a, b, va, vb, oc, plane](Tensor<T>& self) {
            for (int n = 0; n < va.n; ++n) {
                if (a->requires_grad) {
                    a->ensure_grad();
                    const T* gp = self.grad.data() + int64_t(n) * oc * plane;
                    T* ga = a->grad.data() + int64_t(n) * va.c * plane;
                    for (int64_t i = 0; i < int64_t(va.c) * plane; ++i) ga[i] += gp[i];
                }
                if (b->requires_grad) {
                    b->ensure_grad();
                    const T* gp = self.grad.data() + int64_t(n) * oc * plane + int64_t(va.c) * plane;
                    T* gb = b->grad.data() + int64_t(n) * vb.c * plane;
                    for (int64_t i = 0; i < int64_t(vb.c) * plane; ++i) gb[i] += gp[i];
                }
            }
        };
    }
    return out;
}

// Stack rank-3 tensors into a rank-4 batch.
template <typename T>
TensorPtr<T> stack_batch(const std::vector<TensorPtr<T>>& items) {
    if (items.empty()) throw ShapeError("stack_batch: empty input");
    const auto& s0 = items[0]->shape;
    if (s0.size() != 3) throw ShapeError("stack_batch: items must be rank-3");
    for (const auto& t : items)
        if (t->shape != s0) throw ShapeError("stack_batch: mismatched item shapes");
    auto out = make_op_node<T>({int(items.size()), s0[0], s0[1], s0[2]}, items);
    const int64_t isz = items[0]->numel();
    for (size_t n = 0; n < items.size(); ++n)
        std::copy_n(items[n]->data.data(), isz, out->data.data() + int64_t(n) * isz);
    if (out->requires_grad) {
        out->backward_fn = [items, isz](Tensor<T>& self) {
            for (size_t n = 0; n < items.size(); ++n) {
                if (!items[n]->requires_grad) continue;
                items[n]->ensure_grad();
                const T* gp = self.grad.data() + int64_t(n) * isz;
                for (int64_t i = 0; i < isz; ++i) items[n]->grad[i] += gp[i];
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
TensorPtr<T> mean_all(const TensorPtr<T>& x) {
    auto out = make_op_node<T>({1}, {x});
    const int64_t n = x->numel();
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x->data[i];
    out->data[0] = acc / T(n);
    ensure_finite(*out, "mean");
    if (out->requires_grad) {
        out->backward_fn = [x, n](Tensor<T>& self) {
            x->ensure_grad();
            const T g = self.grad[0] / T(n);
            for (int64_t i = 0; i < n; ++i) x->grad[i] += g;
        };
    }
    return out;
}

template <typename T>
TensorPtr<T> sum_all(const TensorPtr<T>& x) {
    auto out = make_op_node<T>({1}, {x});
    const int64_t n = x->numel();
    T acc = 0;
    for (int64_t i = 0; i < n; ++i) acc += x->data[i];
    out->data[0] = acc;
    ensure_finite(*out, "sum");
    if (out->requires_grad) {
        out->backward_fn = [x, n](Tensor<T>& self) {
            x->ensure_grad();
            for (int64_t i = 0; i < n; ++i) x->grad[i] += self.grad[0];
        };
    }
    return out;
}

// Copy that blocks gradient flow.
template <typename T>
TensorPtr<T> detach(const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    out->data = x->data;
    return out;
}

} // namespace sagan
