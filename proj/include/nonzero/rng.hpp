#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nonzero {

// mt19937_64 is fully specified by the standard, so every draw below is
// reproducible across standard libraries (the std distributions are not).
using Rng = std::mt19937_64;

// Uniform integer in [0, bound). bound must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based pseudorandom word keyed by (seed, counter, stream).
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter,
                                     std::uint64_t stream) {
  return mix64(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)) + counter);
}

// Maps a word to (0, 1]; never returns zero so log() is always finite.
constexpr double word_to_open_unit(std::uint64_t w) {
  return (static_cast<double>(w >> 11) + 1.0) * 0x1.0p-53;
}

// Standard normal draw from two counter words (Box-Muller, cosine branch).
inline double counter_normal(std::uint64_t seed, std::uint64_t counter,
                             std::uint64_t stream) {
  const double u1 = word_to_open_unit(counter_hash(seed, counter, stream));
  const double u2 = word_to_open_unit(counter_hash(seed, counter, stream + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace nonzero
