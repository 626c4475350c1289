#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fidsearch {

using Rng = std::mt19937_64;

// SplitMix64 finalizer over (root, stream): independent, reproducible sub-seeds.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Uniform index in [0, n); n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

// Seed streams carved out of one root seed.
namespace streams {
inline constexpr std::uint64_t kClustering = 1;
inline constexpr std::uint64_t kSampling = 2;
inline constexpr std::uint64_t kSynthPool = 3;
inline constexpr std::uint64_t kSynthTarget = 4;
}  // namespace streams

}  // namespace fidsearch
