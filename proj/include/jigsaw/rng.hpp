#pragma once

#include <cmath>
#include <cstdint>

namespace jigsaw {

// Counter-based splittable PRNG. A generator is a (key, counter) pair; the
// n-th output is a SplitMix64-style hash of key and counter, so streams can
// be forked with split() without sharing state. Every stochastic operation
// in the project takes an explicit seed and derives its streams from it,
// which keeps results reproducible and independent of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  // Independent child stream. split(a) != split(b) for a != b.
  [[nodiscard]] Rng split(std::uint64_t tag) const { return Rng(mix(key_, tag)); }

  std::uint64_t next_u64() { return mix(key_, ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Lemire multiply-shift; bias is < 2^-64 * n.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform in [lo, hi].
  std::int64_t next_range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  double next_exponential(double mean) { return -mean * std::log1p(-next_unit()); }

  // Box-Muller; does not use std::normal_distribution so that streams are
  // identical across standard library implementations.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace jigsaw
