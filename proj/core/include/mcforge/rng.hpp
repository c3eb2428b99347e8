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

#include <cstdint>
#include <random>
#include <string_view>

namespace mcforge {

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// splitmix64 finalizer; a bijective bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named random sub-stream ("pv", "split", "shuffle", "init",
/// "sample", ...). Streams with different names are independent.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

/// Seed for a per-item stream, e.g. one instance id inside a stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::string_view key);

/// Uniform double in [0, 1) computed from a keyed hash of `key`.
double keyed_unit(std::uint64_t seed, std::string_view key);

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) from raw engine bits (portable across stdlibs).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle driven by uniform_index.
template <typename It>
void shuffle_range(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace mcforge
