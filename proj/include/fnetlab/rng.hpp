#pragma once

#include <cmath>
#include <cstdint>

#include "fnetlab/common.hpp"

namespace fnetlab {

// SplitMix64 mixing function. Also used as the seed-combining hash so
// that derived streams (per example, per step) are pure functions of
// (root seed, tag).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ (0x9e3779b97f4a7c15ull + key + (seed << 6) + (seed >> 2)));
}

// Seedable splittable generator (SplitMix64). Every stochastic op takes
// one of these explicitly; fork() derives an independent stream without
// advancing the parent, so parallel example generation stays
// reproducible from a single root seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  Rng fork(std::uint64_t key) const { return Rng(hash_combine(state_, key)); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n). Rejection sampling keeps the stream
  // platform-independent.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // Box-Muller without the usual pair cache, so the draw count per call
  // is fixed and the stream does not depend on call history.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.28318530717958647692;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_;
};

}  // namespace fnetlab
