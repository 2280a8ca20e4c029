// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sagan/color.hpp"
#include "sagan/errors.hpp"

namespace sagan {

namespace {

void require_same_shape(const RgbImage& a, const RgbImage& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(op) + ": image sizes differ (" + std::to_string(a.w) + "x" +
                         std::to_string(a.h) + " vs " + std::to_string(b.w) + "x" +
                         std::to_string(b.h) + ")");
}

} // namespace

double psnr(const RgbImage& a, const RgbImage& b, double peak) {
    require_same_shape(a, b, "psnr");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse == 0) return kPsnrSentinel;
    return std::min(kPsnrSentinel, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const RgbImage& a, const RgbImage& b) {
    require_same_shape(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    if (a.h < kWin || a.w < kWin)
        throw ShapeError("ssim: image smaller than the 11x11 window");

    const int h = a.h, w = a.w;
    std::vector<double> ya(size_t(h) * w), yb(size_t(h) * w);
    for (int i = 0; i < h * w; ++i) {
        ya[i] = 0.299 * a.data[3 * i] + 0.587 * a.data[3 * i + 1] + 0.114 * a.data[3 * i + 2];
        yb[i] = 0.299 * b.data[3 * i] + 0.587 * b.data[3 * i + 1] + 0.114 * b.data[3 * i + 2];
    }

    double win[kWin][kWin];
    double wsum = 0;
    for (int y = 0; y < kWin; ++y)
        for (int x = 0; x < kWin; ++x) {
            const double dy = y - kWin / 2, dx = x - kWin / 2;
            win[y][x] = std::exp(-(dy * dy + dx * dx) / (2 * kSigma * kSigma));
            wsum += win[y][x];
        }
    for (auto& row : win)
        for (auto& v : row) v /= wsum;

    double total = 0;
    int64_t count = 0;
    for (int oy = 0; oy + kWin <= h; ++oy)
        for (int ox = 0; ox + kWin <= w; ++ox) {
            double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
            for (int y = 0; y < kWin; ++y)
                for (int x = 0; x < kWin; ++x) {
                    const double wv = win[y][x];
                    const double va = ya[size_t(oy + y) * w + ox + x];
                    const double vb = yb[size_t(oy + y) * w + ox + x];
                    mx += wv * va;
                    my += wv * vb;
                    xx += wv * va * va;
                    yy += wv * vb * vb;
                    xy += wv * va * vb;
                }
            const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
            total += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                     ((mx * mx + my * my + kC1) * (vx + vy + kC2));
            ++count;
        }
    return total / double(count);
}

double delta_e_image(const RgbImage& a, const RgbImage& b) {
    require_same_shape(a, b, "delta_e_image");
    double total = 0;
    const int n = a.h * a.w;
    for (int i = 0; i < n; ++i) {
        const LabColor la = srgb_to_lab_checked(a.data[3 * i], a.data[3 * i + 1], a.data[3 * i + 2]);
        const LabColor lb = srgb_to_lab_checked(b.data[3 * i], b.data[3 * i + 1], b.data[3 * i + 2]);
        total += ciede2000(la, lb);
    }
    return total / double(n);
}

MetricsReport build_report(const std::vector<ImageMetrics>& images) {
    MetricsReport report;
    report.images = images;
    std::map<double, AggregateRow> by_sigma;
    for (const auto& im : images) {
        auto& row = by_sigma[im.sigma];
        row.sigma = im.sigma;
        row.count++;
        row.psnr += im.psnr;
        row.ssim += im.ssim;
        row.delta_e += im.delta_e;
    }
    for (auto& [sigma, row] : by_sigma) {
        row.psnr /= row.count;
        row.ssim /= row.count;
        row.delta_e /= row.count;
        report.aggregates.push_back(row);
    }
    return report;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& im : images) {
        j["images"].push_back({{"name", im.name},
                               {"sigma", im.sigma},
                               {"psnr", im.psnr},
                               {"ssim", im.ssim},
                               {"delta_e", im.delta_e}});
    }
    j["aggregates"] = nlohmann::ordered_json::array();
    for (const auto& row : aggregates) {
        j["aggregates"].push_back({{"sigma", row.sigma},
                                   {"count", row.count},
                                   {"psnr", row.psnr},
                                   {"ssim", row.ssim},
                                   {"delta_e", row.delta_e}});
    }
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad metrics JSON: ") + e.what());
    }
    MetricsReport report;
    for (const auto& item : j.at("images")) {
        ImageMetrics im;
        im.name = item.at("name").get<std::string>();
        im.sigma = item.at("sigma").get<double>();
        im.psnr = item.at("psnr").get<double>();
        im.ssim = item.at("ssim").get<double>();
        im.delta_e = item.at("delta_e").get<double>();
        report.images.push_back(std::move(im));
    }
    for (const auto& item : j.at("aggregates")) {
        AggregateRow row;
        row.sigma = item.at("sigma").get<double>();
        row.count = item.at("count").get<int>();
        row.psnr = item.at("psnr").get<double>();
        row.ssim = item.at("ssim").get<double>();
        row.delta_e = item.at("delta_e").get<double>();
        report.aggregates.push_back(row);
    }
    return report;
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    char line[128];
    os << "sigma    images   PSNR      SSIM      DeltaE\n";
    for (const auto& row : aggregates) {
        std::snprintf(line, sizeof(line), "%-8.4g %-8d %-9.4f %-9.6f %-9.4f\n", row.sigma, row.count,
                      row.psnr, row.ssim, row.delta_e);
        os << line;
    }
    return os.str();
}

} // namespace sagan
