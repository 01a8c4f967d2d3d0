#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

namespace gelboot {

// Counter-based generator. Each stream is identified by (seed, s1, s2);
// draws are produced by hashing an incrementing counter, so streams for
// different Monte Carlo reps / bootstrap replicates never overlap and the
// output does not depend on thread scheduling or platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t s1 = 0,
                      std::uint64_t s2 = 0)
      : key_(mix(mix(mix(0x9e3779b97f4a7c15ULL ^ seed) + s1) + s2)) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0xbf58476d1ce4e5b9ULL); }

  // uniform on (0,1), never returns 0 or 1
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the spare draw is cached
  double normal() {
    if (spare_) {
      double z = *spare_;
      spare_.reset();
      return z;
    }
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    return r * std::cos(a);
  }

  double truncated_normal(double lo, double hi) {
    for (;;) {
      double z = normal();
      if (z >= lo && z <= hi) return z;
    }
  }

  double chisq1() {
    double z = normal();
    return z * z;
  }

  double truncated_chisq1(double lo, double hi) {
    for (;;) {
      double v = chisq1();
      if (v >= lo && v <= hi) return v;
    }
  }

  // index in [0, n)
  std::uint64_t index(std::uint64_t n) {
    // rejection to avoid modulo bias
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v < lim) return v % n;
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

}  // namespace gelboot
