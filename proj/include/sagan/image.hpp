// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace sagan {

// Interleaved RGB image with components in [0,1].
struct RgbImage {
    int h = 0, w = 0;
    std::vector<float> data; // h*w*3, row-major, RGB interleaved

    float at(int y, int x, int c) const { return data[(size_t(y) * w + x) * 3 + c]; }
    float& at(int y, int x, int c) { return data[(size_t(y) * w + x) * 3 + c]; }
};

RgbImage make_rgb(int h, int w, float fill = 0.f);

// 8-bit RGB PNG in, values scaled to [0,1].
RgbImage read_png_rgb8(const std::string& path);

// Rounds to 8 bits and writes an RGB PNG.
void write_png_rgb8(const std::string& path, const RgbImage& img);

// Single-channel 16-bit PNG carrying a [0,1] plane (value = round(v*65535)).
void write_png_gray16(const std::string& path, const std::vector<float>& plane, int h, int w);
std::vector<float> read_png_gray16(const std::string& path, int& h, int& w);

} // namespace sagan
