// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/color.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>

namespace sagan {

LabColor srgb_to_lab_checked(double r, double g, double b) {
    static std::atomic<bool> warned{false};
    if (r < 0 || r > 1 || g < 0 || g > 1 || b < 0 || b > 1) {
        if (!warned.exchange(true))
            std::fprintf(stderr, "warning: sRGB component outside [0,1], clamping\n");
        r = std::clamp(r, 0.0, 1.0);
        g = std::clamp(g, 0.0, 1.0);
        b = std::clamp(b, 0.0, 1.0);
    }
    return srgb_to_lab(r, g, b);
}

} // namespace sagan
