#pragma once

#include <cstdint>
#include <random>

namespace ssmail {

/// Seeded random source shared by every stochastic component.
///
/// Wraps mt19937_64 so that a (seed, call sequence) pair is reproducible on a
/// fixed toolchain. Child streams are derived with `fork` instead of reusing
/// one engine across unrelated consumers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream; deterministic in (parent state, salt).
  Rng fork(std::uint64_t salt) { return Rng(engine_() ^ mix(salt)); }

  std::mt19937_64& engine() { return engine_; }

 private:
  // splitmix64 finalizer so nearby seeds give unrelated streams
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace ssmail
