// Copyright 2026 The mcforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcforge/error.hpp"

// Helpers for the "magic + JSON header + little-endian float32 payload" files
// used by PV models and model checkpoints.
namespace mcforge::binio {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw IoError("truncated file (u64)");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

template <typename T>
void write_f32(std::ostream& out, std::span<const T> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

template <typename T>
void read_f32(std::istream& in, std::span<T> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IoError("truncated float payload");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[4 * i + b]) << (8 * b);
    values[i] = static_cast<T>(std::bit_cast<float>(bits));
  }
}

inline void write_header(std::ostream& out, std::string_view magic, const std::string& json) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  write_u64(out, json.size());
  out.write(json.data(), static_cast<std::streamsize>(json.size()));
}

inline std::string read_header(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw IoError("bad magic: expected " + std::string(magic));
  }
  const std::uint64_t len = read_u64(in);
  if (len > (1ULL << 34)) throw IoError("implausible header length");
  std::string json(len, '\0');
  if (!in.read(json.data(), static_cast<std::streamsize>(len))) throw IoError("truncated header");
  return json;
}

}  // namespace mcforge::binio
