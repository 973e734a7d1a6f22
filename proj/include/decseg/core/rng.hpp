#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "decseg/core/common.hpp"

namespace decseg {

// splitmix64 finalizer: cheap, well-mixed 64-bit hash step.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a root seed and tags. Used to key every
// stochastic component (init, shuffling, jitter) by (seed, purpose, step) so any
// training step can be reproduced without replaying the steps before it.
inline std::uint64_t seed_stream(std::uint64_t root, std::uint64_t tag) {
  return mix64(root ^ mix64(tag));
}
inline std::uint64_t seed_stream(std::uint64_t root, std::uint64_t tag, std::uint64_t step) {
  return mix64(seed_stream(root, tag) ^ mix64(step + 0x51ED270B) );
}

// Compact tag from an ASCII label, so call sites read as seed_stream(seed, rng_tag("jitter")).
constexpr std::uint64_t rng_tag(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  while (*s) h = (h ^ (std::uint64_t)(unsigned char)(*s++)) * 0x100000001B3ULL;
  return h;
}

// Deterministic RNG wrapper. mt19937_64 keeps draws identical across platforms,
// and uniform/normal are implemented directly (not via std::distributions, whose
// outputs are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    DECSEG_CHECK(n > 0, "uniform_int needs n > 0, got " << n);
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = ~0ULL - ~0ULL % (std::uint64_t)n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return (int)(v % (std::uint64_t)n);
  }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates shuffle of an index vector.
  template <class V>
  void shuffle(V& v) {
    for (int i = (int)v.size() - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace decseg
