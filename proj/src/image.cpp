// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "sagan/errors.hpp"

namespace sagan {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

} // namespace

RgbImage make_rgb(int h, int w, float fill) {
    RgbImage img;
    img.h = h;
    img.w = w;
    img.data.assign(size_t(h) * w * 3, fill);
    return img;
}

RgbImage read_png_rgb8(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path);

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    // Normalize any decodable variants (palette, gray, 16-bit, alpha) to RGB8.
    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
    png_set_strip_alpha(r.png);
    png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    const int w = int(png_get_image_width(r.png, r.info));
    const int h = int(png_get_image_height(r.png, r.info));
    if (png_get_channels(r.png, r.info) != 3)
        throw IoError(path + ": expected 3 channels after normalization");

    std::vector<png_byte> raw(size_t(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = raw.data() + size_t(y) * w * 3;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    RgbImage img = make_rgb(h, w);
    for (size_t i = 0; i < raw.size(); ++i) img.data[i] = float(raw[i]) / 255.f;
    return img;
}

void write_png_rgb8(const std::string& path, const RgbImage& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    PngWriter wtr;
    wtr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wtr.png) throw IoError("png_create_write_struct failed");
    wtr.info = png_create_info_struct(wtr.png);
    if (!wtr.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(wtr.png))) throw IoError("failed to encode " + path);

    png_init_io(wtr.png, fp.get());
    png_set_IHDR(wtr.png, wtr.info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wtr.png, wtr.info);

    std::vector<png_byte> row(size_t(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w * 3; ++x) {
            float v = img.data[size_t(y) * img.w * 3 + x];
            v = std::min(1.f, std::max(0.f, v));
            row[x] = png_byte(std::lround(v * 255.f));
        }
        png_write_row(wtr.png, row.data());
    }
    png_write_end(wtr.png, nullptr);
}

void write_png_gray16(const std::string& path, const std::vector<float>& plane, int h, int w) {
    if (plane.size() != size_t(h) * w) throw IoError("plane size does not match dimensions");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);
    PngWriter wtr;
    wtr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wtr.png) throw IoError("png_create_write_struct failed");
    wtr.info = png_create_info_struct(wtr.png);
    if (!wtr.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(wtr.png))) throw IoError("failed to encode " + path);

    png_init_io(wtr.png, fp.get());
    png_set_IHDR(wtr.png, wtr.info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wtr.png, wtr.info);

    std::vector<png_byte> row(size_t(w) * 2); // big-endian 16-bit samples
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float v = std::min(1.f, std::max(0.f, plane[size_t(y) * w + x]));
            const uint16_t q = uint16_t(std::lround(v * 65535.f));
            row[2 * x] = png_byte(q >> 8);
            row[2 * x + 1] = png_byte(q & 0xff);
        }
        png_write_row(wtr.png, row.data());
    }
    png_write_end(wtr.png, nullptr);
}

std::vector<float> read_png_gray16(const std::string& path, int& h, int& w) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("failed to decode " + path);

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16)
        throw IoError(path + ": expected 16-bit grayscale PNG");
    png_read_update_info(r.png, r.info);

    w = int(png_get_image_width(r.png, r.info));
    h = int(png_get_image_height(r.png, r.info));
    std::vector<png_byte> raw(size_t(h) * w * 2);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = raw.data() + size_t(y) * w * 2;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    std::vector<float> plane(size_t(h) * w);
    for (size_t i = 0; i < plane.size(); ++i) {
        const uint16_t q = uint16_t((raw[2 * i] << 8) | raw[2 * i + 1]);
        plane[i] = float(q) / 65535.f;
    }
    return plane;
}

} // namespace sagan
