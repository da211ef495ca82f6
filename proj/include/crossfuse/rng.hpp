#pragma once

// Deterministic random source. mt19937_64 output is pinned by the standard,
// and the transforms below are written out explicitly, so identical seeds give
// identical streams on every platform and standard library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "crossfuse/util.hpp"

namespace crossfuse {

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two draws per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0); 2^-53 keeps the transform finite.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double z = r * std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

  // Uniform integer in [0, bound) without modulo bias (Lemire reduction).
  uint64_t below(uint64_t bound) {
    if (bound == 0) throw ValueError("Rng::below requires a positive bound");
    while (true) {
      uint64_t x = engine_();
      __uint128_t m = static_cast<__uint128_t>(x) * bound;
      auto lo = static_cast<uint64_t>(m);
      if (lo >= bound || lo >= (-bound) % bound) return static_cast<uint64_t>(m >> 64);
    }
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    if (hi < lo) throw ValueError("Rng::uniform_int requires lo <= hi");
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo) + 1));
  }

  // Fisher-Yates, spelled out so the permutation stream is pinned too.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<size_t> permutation(size_t n) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crossfuse
