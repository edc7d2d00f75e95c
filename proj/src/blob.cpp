// Copyright 2026 The distillab Authors
// SPDX-License-Identifier: Apache-2.0
#include "distillab/blob.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace distillab {
namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::array<char, 8> make_magic(std::string_view tag) {
  std::array<char, 8> magic{};
  std::copy_n(tag.begin(), std::min<std::size_t>(tag.size(), 8), magic.begin());
  return magic;
}

void write_blob(const Blob& blob, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(blob.magic.begin(), blob.magic.end());
  bytes.reserve(8 + 4 * (blob.header.size() + blob.payload.size()));
  for (auto word : blob.header) put_u32(bytes, word);
  for (float f : blob.payload) put_u32(bytes, std::bit_cast<std::uint32_t>(f));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Blob read_blob(const std::filesystem::path& path, const std::array<char, 8>& expected, std::size_t header_words) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::size_t fixed = 8 + 4 * header_words;
  if (bytes.size() < fixed || (bytes.size() - fixed) % 4 != 0)
    throw std::runtime_error(path.string() + ": truncated or misaligned blob");
  Blob blob;
  std::copy_n(bytes.begin(), 8, blob.magic.begin());
  if (blob.magic != expected) throw std::runtime_error(path.string() + ": unexpected file magic");
  for (std::size_t i = 0; i < header_words; ++i) blob.header.push_back(get_u32(bytes.data() + 8 + 4 * i));
  const std::size_t floats = (bytes.size() - fixed) / 4;
  blob.payload.resize(floats);
  for (std::size_t i = 0; i < floats; ++i) blob.payload[i] = std::bit_cast<float>(get_u32(bytes.data() + fixed + 4 * i));
  return blob;
}

}  // namespace distillab
