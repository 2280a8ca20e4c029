// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// sRGB -> CIELAB conversion and the CIEDE2000 colour difference. Both are
// written as straight-line code over a generic scalar so they evaluate in
// plain double for metrics and in dual numbers for loss gradients.

#pragma once

#include <cmath>
#include <cstdio>

#include "sagan/dual.hpp"

namespace sagan {

template <typename S>
struct LabT {
    S L, a, b;
};

using LabColor = LabT<double>;

namespace colordetail {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPow25_7 = 6103515625.0; // 25^7

// sRGB D65 linear-RGB -> XYZ matrix. The white point is taken as the exact
// row sums so that (1,1,1) maps to L=100, a=b=0 without residue.
constexpr double kM[3][3] = {
    {0.41239080, 0.35758434, 0.18048079},
    {0.21263901, 0.71516868, 0.07219232},
    {0.01933082, 0.11919478, 0.95053215},
};
constexpr double kXn = kM[0][0] + kM[0][1] + kM[0][2];
constexpr double kYn = kM[1][0] + kM[1][1] + kM[1][2];
constexpr double kZn = kM[2][0] + kM[2][1] + kM[2][2];

template <typename S>
S inverse_gamma(S c) {
    using std::pow;
    using sagan::pow;
    if (c <= S(0.04045)) return c / S(12.92);
    return pow((c + S(0.055)) / S(1.055), S(2.4));
}

template <typename S>
S lab_f(S t) {
    using std::cbrt;
    using sagan::cbrt;
    constexpr double cutoff = 216.0 / 24389.0;         // (6/29)^3
    constexpr double slope = 24389.0 / (27.0 * 116.0); // kappa/116, kappa = 24389/27
    if (t > S(cutoff)) return cbrt(t);
    return S(slope) * t + S(16.0 / 116.0);
}

// Hue angle in degrees in [0, 360).
template <typename S>
S hue_angle_deg(S b, S ap) {
    using std::atan2;
    using sagan::atan2;
    if (ap == S(0) && b == S(0)) return S(0);
    S h = atan2(b, ap) * S(180.0 / kPi);
    if (h < S(0)) h = h + S(360.0);
    return h;
}

} // namespace colordetail

// Components must lie in [0,1]; callers clamp beforehand.
template <typename S>
LabT<S> srgb_to_lab(S r, S g, S b) {
    using namespace colordetail;
    const S rl = inverse_gamma(r), gl = inverse_gamma(g), bl = inverse_gamma(b);
    const S x = S(kM[0][0]) * rl + S(kM[0][1]) * gl + S(kM[0][2]) * bl;
    const S y = S(kM[1][0]) * rl + S(kM[1][1]) * gl + S(kM[1][2]) * bl;
    const S z = S(kM[2][0]) * rl + S(kM[2][1]) * gl + S(kM[2][2]) * bl;
    const S fx = lab_f(x / S(kXn));
    const S fy = lab_f(y / S(kYn));
    const S fz = lab_f(z / S(kZn));
    return {S(116.0) * fy - S(16.0), S(500.0) * (fx - fy), S(200.0) * (fy - fz)};
}

// CIEDE2000 with parametric factors kL = kC = kH = 1. Hue branches follow the
// standard formulation; branch selection is piecewise-constant under
// differentiation.
template <typename S>
S ciede2000(const LabT<S>& col1, const LabT<S>& col2) {
    using namespace colordetail;
    using std::sqrt;
    using sagan::sqrt;
    using std::sin;
    using sagan::sin;
    using std::cos;
    using sagan::cos;
    using std::exp;
    using sagan::exp;
    using std::pow;
    using sagan::pow;
    using std::fabs;
    using sagan::fabs;

    const S c1 = sqrt(col1.a * col1.a + col1.b * col1.b);
    const S c2 = sqrt(col2.a * col2.a + col2.b * col2.b);
    const S cbar = (c1 + c2) * S(0.5);
    const S cbar7 = pow(cbar, S(7.0));
    const S g = S(0.5) * (S(1.0) - sqrt(cbar7 / (cbar7 + S(kPow25_7))));

    const S a1p = (S(1.0) + g) * col1.a;
    const S a2p = (S(1.0) + g) * col2.a;
    const S c1p = sqrt(a1p * a1p + col1.b * col1.b);
    const S c2p = sqrt(a2p * a2p + col2.b * col2.b);
    const S h1p = hue_angle_deg(col1.b, a1p);
    const S h2p = hue_angle_deg(col2.b, a2p);

    const S dl = col2.L - col1.L;
    const S dc = c2p - c1p;

    const bool zero_chroma = (c1p * c2p == S(0));
    S dhp = S(0);
    if (!zero_chroma) {
        const S diff = h2p - h1p;
        if (fabs(diff) <= S(180.0)) {
            dhp = diff;
        } else if (diff > S(180.0)) {
            dhp = diff - S(360.0);
        } else {
            dhp = diff + S(360.0);
        }
    }
    const S dh = S(2.0) * sqrt(c1p * c2p) * sin(dhp * S(0.5) * S(kPi / 180.0));

    const S lbar = (col1.L + col2.L) * S(0.5);
    const S cbarp = (c1p + c2p) * S(0.5);

    S hbar;
    if (zero_chroma) {
        hbar = h1p + h2p;
    } else {
        const S sum = h1p + h2p;
        if (fabs(h1p - h2p) <= S(180.0)) {
            hbar = sum * S(0.5);
        } else if (sum < S(360.0)) {
            hbar = (sum + S(360.0)) * S(0.5);
        } else {
            hbar = (sum - S(360.0)) * S(0.5);
        }
    }

    const S rad = S(kPi / 180.0);
    const S t = S(1.0) - S(0.17) * cos((hbar - S(30.0)) * rad) + S(0.24) * cos(S(2.0) * hbar * rad) +
                S(0.32) * cos((S(3.0) * hbar + S(6.0)) * rad) -
                S(0.20) * cos((S(4.0) * hbar - S(63.0)) * rad);
    const S dtheta_arg = (hbar - S(275.0)) / S(25.0);
    const S dtheta = S(30.0) * exp(-(dtheta_arg * dtheta_arg));
    const S cbarp7 = pow(cbarp, S(7.0));
    const S rc = S(2.0) * sqrt(cbarp7 / (cbarp7 + S(kPow25_7)));

    const S l50sq = (lbar - S(50.0)) * (lbar - S(50.0));
    const S sl = S(1.0) + S(0.015) * l50sq / sqrt(S(20.0) + l50sq);
    const S sc = S(1.0) + S(0.045) * cbarp;
    const S sh = S(1.0) + S(0.015) * cbarp * t;
    const S rt = -sin(S(2.0) * dtheta * rad) * rc;

    const S tl = dl / sl;
    const S tc = dc / sc;
    const S th = dh / sh;
    return sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

// Convenience double-precision entry point with the documented clamp-and-warn
// behaviour for out-of-range components.
LabColor srgb_to_lab_checked(double r, double g, double b);

} // namespace sagan
