#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vistrack {

/// Seedable random stream with explicit bit-to-value mappings so generated
/// scenarios are reproducible independent of the standard library's
/// distribution implementations. Backed by mt19937_64.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1): top 53 bits of one engine draw.
  double next_double() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double next_gaussian() {
    const double u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace vistrack
