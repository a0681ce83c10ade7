// Copyright 2026 The astroseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "astroseq/matrix.hpp"

namespace astroseq {

/// Named sub-streams fanned out from one run seed.
enum class Stream : std::uint64_t { data = 1, init = 2, dropout = 3, validation = 4, shuffle = 5 };

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based key derivation: a pure function of (seed, stream, counters).
/// Two calls with the same arguments give the same key on every platform.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0) noexcept;

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(seed, stream, a, b));
}

/// Uniform double in [0, 1) built from the top 53 bits; unlike
/// std::uniform_real_distribution the result is identical across standard
/// library implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }
/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
/// Standard normal via Box-Muller on uniform01.
double normal(Rng& rng);

Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);
Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

/// 64-bit FNV-1a, used for stable content hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace astroseq
