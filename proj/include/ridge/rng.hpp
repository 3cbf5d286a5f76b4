#pragma once

// Deterministic random streams.
//
// All randomness flows through std::mt19937_64, whose output sequence is fixed
// by the C++ standard (the 10000th draw from a default-seeded engine is
// 9981545732273789042), so a seed reproduces the same patterns on every
// conforming implementation. Distribution objects from <random> are avoided
// because their algorithms are implementation-defined.
//
// Seeds for derived streams (cells, trials, cues) are combined with the
// SplitMix64 finalizer (Steele, Lea & Flood, 2014).

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ridge {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer: a bijective 64-bit avalanche mix.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of words into one seed: h <- splitmix64(h ^ word), starting at 0.
constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0;
  for (auto w : words) h = splitmix64(h ^ w);
  return h;
}

inline std::uint64_t double_bits(double v) noexcept { return std::bit_cast<std::uint64_t>(v); }

/// Unbiased integer in [0, bound) by rejection on the top bits. bound > 0.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const int bits = 64 - std::countl_zero(bound - 1);
  for (;;) {
    const std::uint64_t r = eng() >> (64 - bits);
    if (r < bound) return r;
  }
}

}  // namespace ridge
