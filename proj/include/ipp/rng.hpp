#pragma once

#include <cstdint>
#include <random>

namespace ipp {

/// All randomness in the toolkit flows through caller-owned engines of this type.
using Rng = std::mt19937_64;

/// Splitmix64 finalizer over (base, stream). Gives well-separated child seeds so
/// scenario i, worker k, etc. each get an independent reproducible stream.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace ipp
