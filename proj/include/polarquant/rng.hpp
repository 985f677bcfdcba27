#pragma once

#include <cstdint>
#include <random>

namespace polarquant {

/// Seeded generator used by every Monte Carlo routine and synthetic source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution transforms are implemented here rather than
/// with <random> distributions, whose algorithms are implementation-defined,
/// so reports are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Laplace with unit scale (variance 2), by inverse CDF.
  double laplace();
  /// Student-t with the given integer degrees of freedom, as Z / sqrt(chi2 / dof).
  double student_t(int dof);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace polarquant
