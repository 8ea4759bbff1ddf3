#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hte {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of `master`. Distinct streams never share state.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Rounds to the dyadic grid 2^-32. Sums and small dyadic multiples of grid
/// values stay exact in binary64, which keeps structural counterfactuals bitwise.
inline double quantize(double x) { return std::ldexp(std::nearbyint(std::ldexp(x, 32)), -32); }

}  // namespace hte
