#pragma once

#include <cstdint>
#include <random>

namespace otfwi {

/// Seeded RNG with a fixed bit-to-double mapping. std::mt19937_64 output is
/// standardized, but the std distribution wrappers are not; this keeps runs
/// bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform in [-half_width, half_width), mean zero.
  double symmetric(double half_width) { return uniform(-half_width, half_width); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace otfwi
