#pragma once

// Portable random helpers. std::uniform_real_distribution and std::shuffle
// are implementation-defined, so draws are built directly on the raw
// mt19937_64 output to keep trajectories identical across toolchains.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>

namespace foldplan {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits. Consumes one engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection sampling; n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

// Fisher-Yates, last element first.
template <typename T, std::size_t N>
void shuffle(std::array<T, N>& items, Rng& rng) {
  for (std::size_t i = N; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable 64-bit seed derivation: hash(base, a, b).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ (a + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (b + 0x2545f4914f6cdd1dULL));
  return h;
}

}  // namespace foldplan
