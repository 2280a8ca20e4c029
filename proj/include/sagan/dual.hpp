// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

namespace sagan {

// Forward-mode scalar with K tangent components. Used to push analytic
// derivatives through straight-line colour code; branch conditions read the
// primal value, so piecewise definitions get the subgradient of the active
// branch. Derivative singularities (sqrt at 0, atan2 at the origin) yield a
// zero tangent rather than a non-finite one.
template <typename T, int K>
struct Dual {
    T v{};
    std::array<T, K> d{};

    Dual() = default;
    Dual(T value) : v(value) {} // NOLINT: implicit by design
    static Dual seeded(T value, int k) {
        Dual r(value);
        r.d[k] = T(1);
        return r;
    }
};

template <typename T, int K>
Dual<T, K> operator+(const Dual<T, K>& a, const Dual<T, K>& b) {
    Dual<T, K> r(a.v + b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
}
template <typename T, int K>
Dual<T, K> operator-(const Dual<T, K>& a, const Dual<T, K>& b) {
    Dual<T, K> r(a.v - b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
}
template <typename T, int K>
Dual<T, K> operator-(const Dual<T, K>& a) {
    Dual<T, K> r(-a.v);
    for (int i = 0; i < K; ++i) r.d[i] = -a.d[i];
    return r;
}
template <typename T, int K>
Dual<T, K> operator*(const Dual<T, K>& a, const Dual<T, K>& b) {
    Dual<T, K> r(a.v * b.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
}
template <typename T, int K>
Dual<T, K> operator/(const Dual<T, K>& a, const Dual<T, K>& b) {
    Dual<T, K> r(a.v / b.v);
    const T inv2 = T(1) / (b.v * b.v);
    for (int i = 0; i < K; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
    return r;
}

template <typename T, int K> Dual<T, K> operator+(const Dual<T, K>& a, T b) { return a + Dual<T, K>(b); }
template <typename T, int K> Dual<T, K> operator+(T a, const Dual<T, K>& b) { return Dual<T, K>(a) + b; }
template <typename T, int K> Dual<T, K> operator-(const Dual<T, K>& a, T b) { return a - Dual<T, K>(b); }
template <typename T, int K> Dual<T, K> operator-(T a, const Dual<T, K>& b) { return Dual<T, K>(a) - b; }
template <typename T, int K> Dual<T, K> operator*(const Dual<T, K>& a, T b) { return a * Dual<T, K>(b); }
template <typename T, int K> Dual<T, K> operator*(T a, const Dual<T, K>& b) { return Dual<T, K>(a) * b; }
template <typename T, int K> Dual<T, K> operator/(const Dual<T, K>& a, T b) { return a / Dual<T, K>(b); }
template <typename T, int K> Dual<T, K> operator/(T a, const Dual<T, K>& b) { return Dual<T, K>(a) / b; }

template <typename T, int K> bool operator<(const Dual<T, K>& a, const Dual<T, K>& b) { return a.v < b.v; }
template <typename T, int K> bool operator>(const Dual<T, K>& a, const Dual<T, K>& b) { return a.v > b.v; }
template <typename T, int K> bool operator<=(const Dual<T, K>& a, const Dual<T, K>& b) { return a.v <= b.v; }
template <typename T, int K> bool operator>=(const Dual<T, K>& a, const Dual<T, K>& b) { return a.v >= b.v; }
template <typename T, int K> bool operator==(const Dual<T, K>& a, const Dual<T, K>& b) { return a.v == b.v; }
template <typename T, int K> bool operator<(const Dual<T, K>& a, T b) { return a.v < b; }
template <typename T, int K> bool operator>(const Dual<T, K>& a, T b) { return a.v > b; }
template <typename T, int K> bool operator<=(const Dual<T, K>& a, T b) { return a.v <= b; }
template <typename T, int K> bool operator>=(const Dual<T, K>& a, T b) { return a.v >= b; }
template <typename T, int K> bool operator==(const Dual<T, K>& a, T b) { return a.v == b; }

template <typename T, int K>
Dual<T, K> sqrt(const Dual<T, K>& a) {
    const T s = std::sqrt(a.v);
    Dual<T, K> r(s);
    if (s != T(0)) {
        const T inv = T(0.5) / s;
        for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * inv;
    }
    return r;
}

template <typename T, int K>
Dual<T, K> cbrt(const Dual<T, K>& a) {
    const T c = std::cbrt(a.v);
    Dual<T, K> r(c);
    if (c != T(0)) {
        const T inv = T(1) / (T(3) * c * c);
        for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * inv;
    }
    return r;
}

template <typename T, int K>
Dual<T, K> exp(const Dual<T, K>& a) {
    const T e = std::exp(a.v);
    Dual<T, K> r(e);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * e;
    return r;
}

template <typename T, int K>
Dual<T, K> sin(const Dual<T, K>& a) {
    Dual<T, K> r(std::sin(a.v));
    const T c = std::cos(a.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * c;
    return r;
}

template <typename T, int K>
Dual<T, K> cos(const Dual<T, K>& a) {
    Dual<T, K> r(std::cos(a.v));
    const T ns = -std::sin(a.v);
    for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * ns;
    return r;
}

// Power with a constant exponent (the only form the colour code needs).
template <typename T, int K>
Dual<T, K> pow(const Dual<T, K>& a, T e) {
    Dual<T, K> r(std::pow(a.v, e));
    if (a.v != T(0)) {
        const T f = e * std::pow(a.v, e - T(1));
        for (int i = 0; i < K; ++i) r.d[i] = a.d[i] * f;
    }
    return r;
}

template <typename T, int K>
Dual<T, K> atan2(const Dual<T, K>& y, const Dual<T, K>& x) {
    Dual<T, K> r(std::atan2(y.v, x.v));
    const T den = x.v * x.v + y.v * y.v;
    if (den != T(0)) {
        const T inv = T(1) / den;
        for (int i = 0; i < K; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) * inv;
    }
    return r;
}

template <typename T, int K>
Dual<T, K> fabs(const Dual<T, K>& a) {
    return a.v < T(0) ? -a : a;
}

} // namespace sagan
