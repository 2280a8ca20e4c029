// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/cfa.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "sagan/errors.hpp"
#include "sagan/rng.hpp"

namespace fs = std::filesystem;

namespace sagan {

const char* cfa_kind_name(CfaKind kind) {
    switch (kind) {
        case CfaKind::Bayer: return "bayer";
        case CfaKind::Quad: return "quad";
        case CfaKind::Nona: return "nona";
    }
    return "?";
}

CfaKind cfa_kind_from_name(const std::string& name) {
    if (name == "bayer") return CfaKind::Bayer;
    if (name == "quad") return CfaKind::Quad;
    if (name == "nona") return CfaKind::Nona;
    throw IoError("unknown CFA pattern kind: " + name);
}

CfaPattern make_pattern(CfaKind kind) {
    // RGGB base.
    static const int base[2][2] = {{0, 1}, {1, 2}};
    int block;
    switch (kind) {
        case CfaKind::Bayer: block = 1; break;
        case CfaKind::Quad: block = 2; break;
        case CfaKind::Nona: block = 3; break;
        default: throw IoError("unknown CFA pattern kind");
    }
    CfaPattern p;
    p.kind = kind;
    p.period = 2 * block;
    p.map.resize(size_t(p.period) * p.period);
    for (int y = 0; y < p.period; ++y)
        for (int x = 0; x < p.period; ++x) p.map[size_t(y) * p.period + x] = base[y / block][x / block];
    return p;
}

MosaicImage mosaic(const RgbImage& rgb, const CfaPattern& pattern) {
    if (rgb.h % pattern.period != 0 || rgb.w % pattern.period != 0)
        throw ShapeError("mosaic: image " + std::to_string(rgb.w) + "x" + std::to_string(rgb.h) +
                         " is not a multiple of the pattern period " + std::to_string(pattern.period));
    MosaicImage m;
    m.h = rgb.h;
    m.w = rgb.w;
    m.pattern = pattern;
    m.plane.resize(size_t(rgb.h) * rgb.w);
    for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x)
            m.plane[size_t(y) * rgb.w + x] = rgb.at(y, x, pattern.channel_at(y, x));
    return m;
}

MosaicImage add_noise(const MosaicImage& m, double sigma, uint64_t seed) {
    if (sigma < 0) throw ShapeError("add_noise: sigma must be >= 0");
    MosaicImage out = m;
    out.sigma = sigma;
    out.seed = seed;
    if (sigma == 0) return out;
    CounterRng rng(CounterRng::derive(seed, "noise"));
    const double scale = sigma / 255.0;
    for (auto& v : out.plane) {
        const double noisy = double(v) + scale * rng.next_normal();
        v = float(std::min(1.0, std::max(0.0, noisy)));
    }
    return out;
}

MosaicImage bin_nona_to_bayer(const MosaicImage& m) {
    if (m.pattern.kind != CfaKind::Nona)
        throw ShapeError("bin_nona_to_bayer: input must carry a nona pattern");
    if (m.h % 6 != 0 || m.w % 6 != 0)
        throw ShapeError("bin_nona_to_bayer: dims must be multiples of 6");
    MosaicImage out;
    out.h = m.h / 3;
    out.w = m.w / 3;
    out.pattern = make_pattern(CfaKind::Bayer);
    out.sigma = m.sigma;
    out.seed = m.seed;
    out.plane.resize(size_t(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0;
            for (int dy = 0; dy < 3; ++dy)
                for (int dx = 0; dx < 3; ++dx) acc += m.plane[size_t(3 * y + dy) * m.w + 3 * x + dx];
            out.plane[size_t(y) * out.w + x] = float(acc / 9.0);
        }
    return out;
}

PatchSet patches_from_images(const std::vector<std::pair<std::string, RgbImage>>& images, int size,
                             int stride) {
    if (size < 1 || stride < 1) throw ShapeError("extract_patches: size and stride must be >= 1");
    PatchSet set;
    set.size = size;
    set.stride = stride;
    for (const auto& [path, img] : images) {
        for (int oy = 0; oy + size <= img.h; oy += stride)
            for (int ox = 0; ox + size <= img.w; ox += stride) {
                Patch p;
                p.source_path = path;
                p.off_x = ox;
                p.off_y = oy;
                p.image = make_rgb(size, size);
                for (int y = 0; y < size; ++y)
                    for (int x = 0; x < size; ++x)
                        for (int c = 0; c < 3; ++c)
                            p.image.at(y, x, c) = img.at(oy + y, ox + x, c);
                set.patches.push_back(std::move(p));
            }
    }
    return set;
}

PatchSet extract_patches(const std::string& image_dir, int size, int stride) {
    std::vector<std::string> paths;
    if (!fs::is_directory(image_dir)) throw IoError(image_dir + " is not a directory");
    for (const auto& e : fs::directory_iterator(image_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());

    std::vector<std::pair<std::string, RgbImage>> images;
    for (const auto& p : paths) {
        try {
            images.emplace_back(p, read_png_rgb8(p));
        } catch (const IoError& err) {
            std::cerr << "warning: skipping " << p << ": " << err.what() << "\n";
        }
    }
    PatchSet set = patches_from_images(images, size, stride);
    if (set.patches.empty())
        throw IoError("no usable " + std::to_string(size) + "x" + std::to_string(size) +
                      " patches found under " + image_dir);
    return set;
}

void write_mosaic(const std::string& png_path, const MosaicImage& m) {
    write_png_gray16(png_path, m.plane, m.h, m.w);
    nlohmann::ordered_json side;
    side["pattern"] = cfa_kind_name(m.pattern.kind);
    side["base"] = "RGGB";
    side["sigma"] = m.sigma;
    // sigma 0 draws no noise, so the seed is normalized away.
    side["seed"] = m.sigma == 0 ? 0 : m.seed;
    std::ofstream out(png_path + ".json");
    if (!out) throw IoError("cannot write " + png_path + ".json");
    out << side.dump(2) << "\n";
}

MosaicImage read_mosaic(const std::string& png_path) {
    MosaicImage m;
    m.plane = read_png_gray16(png_path, m.h, m.w);
    std::ifstream in(png_path + ".json");
    if (!in) throw IoError("missing sidecar " + png_path + ".json");
    nlohmann::json side;
    try {
        in >> side;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad sidecar " + png_path + ".json: " + e.what());
    }
    m.pattern = make_pattern(cfa_kind_from_name(side.at("pattern").get<std::string>()));
    if (side.at("base").get<std::string>() != "RGGB")
        throw IoError("unsupported CFA base in " + png_path + ".json");
    m.sigma = side.at("sigma").get<double>();
    m.seed = side.at("seed").get<uint64_t>();
    return m;
}

} // namespace sagan
