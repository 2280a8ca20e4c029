// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Colour-filter-array capture simulation: pattern construction, mosaicing,
// Gaussian readout noise, Nona->Bayer pixel binning, training-patch
// ingestion, and the mosaic file format (16-bit PNG + JSON sidecar).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sagan/image.hpp"

namespace sagan {

enum class CfaKind { Bayer, Quad, Nona };

const char* cfa_kind_name(CfaKind kind);
CfaKind cfa_kind_from_name(const std::string& name);

// Periodic channel-assignment map. Quad and Nona tile the RGGB Bayer base
// into 2x2 and 3x3 homogeneous blocks, giving periods 4 and 6.
struct CfaPattern {
    CfaKind kind = CfaKind::Bayer;
    int period = 2;
    std::vector<int> map; // period*period channel indices, 0=R 1=G 2=B

    int channel_at(int y, int x) const {
        return map[size_t(y % period) * period + (x % period)];
    }
};

CfaPattern make_pattern(CfaKind kind);

// Single-plane sampled image plus capture metadata. sigma is the noise
// standard deviation in 8-bit units.
struct MosaicImage {
    int h = 0, w = 0;
    std::vector<float> plane; // [0,1]
    CfaPattern pattern;
    double sigma = 0.0;
    uint64_t seed = 0;
};

// plane(y,x) = rgb(y,x, pattern channel); dims must be period multiples.
MosaicImage mosaic(const RgbImage& rgb, const CfaPattern& pattern);

// plane' = clip(plane + N(0, sigma/255), 0, 1); deterministic in (seed).
MosaicImage add_noise(const MosaicImage& m, double sigma, uint64_t seed);

// Averages each homogeneous 3x3 Nona block into one Bayer pixel ((H/3)x(W/3)).
MosaicImage bin_nona_to_bayer(const MosaicImage& m);

struct Patch {
    RgbImage image;
    std::string source_path;
    int off_x = 0, off_y = 0;
};

// Ground-truth patches in deterministic order (sorted path, then raster
// offset). Partial edge patches are discarded; stride == size gives the
// non-overlapping tiling used for training.
struct PatchSet {
    int size = 0, stride = 0;
    std::vector<Patch> patches;
};

PatchSet extract_patches(const std::string& image_dir, int size, int stride);
PatchSet patches_from_images(const std::vector<std::pair<std::string, RgbImage>>& images, int size,
                             int stride);

// Mosaic container: <path> is a 16-bit grayscale PNG, <path>.json the sidecar
// {"pattern": ..., "base": "RGGB", "sigma": ..., "seed": ...}.
void write_mosaic(const std::string& png_path, const MosaicImage& m);
MosaicImage read_mosaic(const std::string& png_path);

} // namespace sagan
