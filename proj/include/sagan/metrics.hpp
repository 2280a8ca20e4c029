// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sagan/image.hpp"

namespace sagan {

// 10*log10(peak^2/MSE) over all channels; a zero-MSE pair reports the 100 dB
// sentinel.
double psnr(const RgbImage& a, const RgbImage& b, double peak = 1.0);
constexpr double kPsnrSentinel = 100.0;

// Mean local SSIM on luminance (Y = 0.299R + 0.587G + 0.114B) with an 11x11
// Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, peak 1. Windows are
// evaluated only where they fit entirely inside the image.
double ssim(const RgbImage& a, const RgbImage& b);

// Mean per-pixel CIEDE2000.
double delta_e_image(const RgbImage& a, const RgbImage& b);

struct ImageMetrics {
    std::string name;
    double sigma = 0;
    double psnr = 0, ssim = 0, delta_e = 0;
};

struct AggregateRow {
    double sigma = 0;
    int count = 0;
    double psnr = 0, ssim = 0, delta_e = 0; // means over images
};

// Per-image and per-sigma aggregate PSNR/SSIM/DeltaE results.
struct MetricsReport {
    std::vector<ImageMetrics> images;
    std::vector<AggregateRow> aggregates; // one row per sigma, ascending

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    std::string to_table() const;
};

MetricsReport build_report(const std::vector<ImageMetrics>& images);

} // namespace sagan
