#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace klrf {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `index` of `seed`. Distinct (seed, index) pairs give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

// The helpers below avoid std:: distributions so that streams are identical across
// standard library implementations.

/// Uniform in [0, 1).
inline double uniform01(Rng & rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform in (0, 1].
inline double uniform01_open_low(Rng & rng) { return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53; }

inline double uniform(Rng & rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng & rng, std::uint64_t n)
{
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Standard normal via Box-Muller.
inline double standard_normal(Rng & rng)
{
  double const u1 = uniform01_open_low(rng);
  double const u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace klrf
