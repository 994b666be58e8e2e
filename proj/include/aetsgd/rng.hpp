#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace aetsgd {

using Rng = std::mt19937_64;

// Stream tags. Each concern gets its own generator seeded from seed ^ tag so
// that drawing more numbers for one concern leaves the others untouched.
enum class StreamTag : std::uint64_t {
  kSetup = 0x5e7u,
  kCompute = 0xc0u,
  kNetwork = 0x4e7u,
  kSampling = 0x5a4u,
  kData = 0xda7au,
  kEval = 0xe7a1u,
  kInit = 0x1417u,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ static_cast<std::uint64_t>(tag)) + index);
}

inline Rng make_rng(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, tag, index));
}

// [0, 1) with 53 random bits; independent of the standard library's
// distribution implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Box-Muller; one draw per call keeps the stream position easy to reason about.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace aetsgd
