#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace natscan {

/// All randomness in the project flows from this engine. mt19937_64's output
/// sequence is fixed by the standard; the helpers below avoid the
/// implementation-defined std:: distributions so runs are reproducible
/// across standard libraries.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform in [0, 1) with 53 bits of precision.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [0, n), n > 0. Rejection sampling, no modulo bias.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform in [lo, hi].
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(
                  uniform_below(rng, static_cast<std::uint64_t>(hi - lo) + 1));
}

inline bool bernoulli(Rng& rng, double p) { return p > 0 && uniform01(rng) < p; }

/// Exponential variate with the given rate.
inline double exponential(Rng& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

inline std::uint16_t random_ephemeral_port(Rng& rng) {
  return static_cast<std::uint16_t>(uniform_int(rng, 32768, 60999));
}

inline std::uint32_t random_u32(Rng& rng) { return static_cast<std::uint32_t>(rng()); }

} // namespace natscan
