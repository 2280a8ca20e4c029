// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0

#include "sagan/checkpoint.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>

#include "sagan/errors.hpp"
#include "sagan/tensor.hpp"

namespace sagan {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'G', 'N'};
constexpr uint32_t kVersion = 1;

void put_u16(std::vector<unsigned char>& out, uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

struct Cursor {
    const unsigned char* p;
    size_t remaining;

    void need(size_t n) const {
        if (remaining < n) throw IoError("checkpoint truncated");
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(p[0]) | uint16_t(p[1]) << 8;
        p += 2;
        remaining -= 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
        p += 4;
        remaining -= 4;
        return v;
    }
    void bytes(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, p, n);
        p += n;
        remaining -= n;
    }
};

} // namespace

std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, uint32_t(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xffff) throw IoError("tensor name too long: " + t.name);
        if (t.shape.size() > 0xff) throw IoError("tensor rank too large: " + t.name);
        if (shape_numel(t.shape) != int64_t(t.data.size()))
            throw IoError("tensor data does not match shape: " + t.name);
        put_u16(out, uint16_t(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        out.push_back(0); // dtype f32
        out.push_back(uint8_t(t.shape.size()));
        for (int d : t.shape) put_u32(out, uint32_t(d));
        const size_t pos = out.size();
        out.resize(pos + t.data.size() * 4);
        static_assert(sizeof(float) == 4);
        std::memcpy(out.data() + pos, t.data.data(), t.data.size() * 4);
    }
    const uint32_t crc = uint32_t(::crc32(0, out.data(), uInt(out.size())));
    put_u32(out, crc);
    return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 16) throw IoError("checkpoint truncated");
    const uint32_t stored_crc = uint32_t(bytes[bytes.size() - 4]) |
                                uint32_t(bytes[bytes.size() - 3]) << 8 |
                                uint32_t(bytes[bytes.size() - 2]) << 16 |
                                uint32_t(bytes[bytes.size() - 1]) << 24;
    const uint32_t actual_crc = uint32_t(::crc32(0, bytes.data(), uInt(bytes.size() - 4)));
    if (stored_crc != actual_crc) throw IoError("checkpoint CRC mismatch");

    Cursor cur{bytes.data(), bytes.size() - 4};
    char magic[4];
    cur.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("bad checkpoint magic");
    const uint32_t version = cur.u32();
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    const uint32_t count = cur.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const uint16_t name_len = cur.u16();
        t.name.resize(name_len);
        cur.bytes(t.name.data(), name_len);
        cur.need(2);
        const uint8_t dtype = *cur.p;
        cur.p++;
        cur.remaining--;
        if (dtype != 0) throw IoError("unsupported dtype in checkpoint tensor " + t.name);
        const uint8_t rank = *cur.p;
        cur.p++;
        cur.remaining--;
        t.shape.resize(rank);
        int64_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            t.shape[d] = int(cur.u32());
            numel *= t.shape[d];
        }
        t.data.resize(size_t(numel));
        cur.bytes(t.data.data(), size_t(numel) * 4);
        tensors.push_back(std::move(t));
    }
    if (cur.remaining != 0) throw IoError("trailing bytes in checkpoint");
    return tensors;
}

void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    const auto bytes = encode_checkpoint(tensors);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

std::vector<NamedTensor> load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const auto size = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> bytes(size_t(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("short read from " + path);
    return decode_checkpoint(bytes);
}

} // namespace sagan
