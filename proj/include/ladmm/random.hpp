#pragma once

// Fixed, documented random streams so generated instances are reproducible
// bit for bit on any platform with IEEE doubles and a correctly rounded libm.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

namespace ladmm {

/// SplitMix64 (Steele, Lea, Flood). One 64-bit output per call.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Top 53 bits as a double in (0, 1]: ((z >> 11) + 1) * 2^-53.
  double uniform() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Standard normals by Box-Muller. Each pair uses two uniforms u1, u2 (in that
/// order); r cos(2 pi u2) is returned first and r sin(2 pi u2) on the next call,
/// with r = sqrt(-2 ln u1).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) noexcept : rng_(seed) {}

  double next() noexcept {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = rng_.uniform();
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

 private:
  SplitMix64 rng_;
  std::optional<double> spare_;
};

}  // namespace ladmm
