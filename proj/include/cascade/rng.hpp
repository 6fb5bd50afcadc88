// Deterministic random number generation.
//
// All randomness in the library flows through Rng.  The core generator is
// std::mt19937_64, whose output sequence is pinned by the C++ standard, but
// the derived samplers (uniform doubles, bounded ints, normals, shuffles) are
// implemented here by hand: the std::*_distribution adapters and std::shuffle
// are implementation-defined and would break cross-platform reproducibility
// of seeded datasets and frozen test values.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cascade {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), using the top 53 bits of the generator.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Uniform integer in [0, n).  n must be positive.
  std::uint32_t uniform_int(std::uint32_t n) {
    // Rejection-free multiply-shift; the modulo bias of 2^64 over small n is
    // far below anything observable, and determinism is what matters here.
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  /// Standard normal via Box-Muller.  The spare value is cached so draws
  /// consume generator output in a fixed pattern.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Fisher-Yates shuffle with this generator's bounded ints.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cascade
