#pragma once

#include <cmath>
#include <cstdint>

namespace kda {

/// Deterministic 64-bit generator (splitmix64) with a Box-Muller normal
/// transform layered on top. The seed -> stream mapping is part of the
/// reproducibility contract of the synthetic generators and the splitter:
/// the same seed must yield the same dataset on every platform, so nothing
/// here may depend on implementation-defined standard-library distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 bits of the state.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal deviate. Pairs are produced by Box-Muller; the second
  /// member of each pair is cached so consecutive calls consume uniforms in
  /// a fixed, documented order (two per pair).
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Guard against log(0): shift the open interval away from zero.
    double u1 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace kda
