// Copyright 2026 The sagan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: little-endian, magic "SAGN", u32 version=1, u32
// tensor count, then per tensor u16 name length, UTF-8 name, u8 dtype
// (0 = f32), u8 rank, u32 dims[rank], raw f32 data. A CRC32 of all preceding
// bytes closes the file.

#pragma once

#include <string>
#include <vector>

namespace sagan {

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

std::vector<unsigned char> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint_file(const std::string& path);

} // namespace sagan
