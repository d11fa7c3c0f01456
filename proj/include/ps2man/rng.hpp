#pragma once

#include <cstdint>
#include <random>

namespace ps2man {

/// Deterministic, splittable random source. Every stream in the project is
/// derived from one master seed plus a handful of stream keys, so the order
/// in which components draw numbers can never change the numbers they get.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_mix_(mix(seed)), engine_(seed_mix_) {}

  /// Child stream keyed by up to three integers (epoch, index, purpose...).
  Rng split(uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
    uint64_t s = seed_mix_;
    s = mix(s ^ mix(a + 0x9e3779b97f4a7c15ull));
    s = mix(s ^ mix(b + 0xbf58476d1ce4e5b9ull));
    s = mix(s ^ mix(c + 0x94d049bb133111ebull));
    return Rng(s, 0);
  }

  float uniform(float lo, float hi) {
    return std::uniform_real_distribution<float>(lo, hi)(engine_);
  }
  double uniform_double(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  float normal(float mean, float stddev) {
    return std::normal_distribution<float>(mean, stddev)(engine_);
  }
  /// Integer in [0, n).
  uint64_t next_index(uint64_t n) {
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) {
    return std::bernoulli_distribution(p)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  Rng(uint64_t mixed, int) : seed_mix_(mixed), engine_(mixed) {}

  // splitmix64 finalizer
  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t seed_mix_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace ps2man
