#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ledcnet {

/// Deterministic random source. Distribution shaping is implemented here
/// rather than with std:: distributions so that streams are stable across
/// standard-library implementations.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return engine_() % n; }

  template <typename Seq>
  void shuffle(Seq& seq) {
    if (seq.empty()) return;
    for (size_t i = seq.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(below(i + 1));
      std::swap(seq[i], seq[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ledcnet
