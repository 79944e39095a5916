#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace vsr {

// Seeded generator used everywhere randomness is needed. The gaussian and
// uniform transforms are written out explicitly so that streams are
// reproducible bit-for-bit across standard library implementations; only the
// mt19937_64 engine (whose sequence is pinned by the standard) comes from the
// stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range draw.
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    const std::uint64_t n = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % n);
  }

  // Standard normal via Box-Muller; consumes two engine draws per call.
  double normal() {
    const double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;       // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t next_u64() { return eng_(); }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 eng_;
};

}  // namespace vsr
