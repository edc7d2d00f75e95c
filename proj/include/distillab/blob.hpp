// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace distillab {

/// Flat binary container: 8-byte magic, uint32 header words, then float32
/// payload. All integers and floats are little-endian.
struct Blob {
  std::array<char, 8> magic{};
  std::vector<std::uint32_t> header;
  std::vector<float> payload;
};

std::array<char, 8> make_magic(std::string_view tag);
void write_blob(const Blob& blob, const std::filesystem::path& path);
/// Reads a blob whose magic must equal `expected`; header_words is the number
/// of uint32 values following the magic. The payload is the rest of the file.
Blob read_blob(const std::filesystem::path& path, const std::array<char, 8>& expected, std::size_t header_words);

}  // namespace distillab
