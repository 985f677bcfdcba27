#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polarquant/tensor.hpp"

namespace polarquant {

enum class SourceKind { gaussian, laplace, student_t, outlier_spiked };

std::string_view source_name(SourceKind kind) noexcept;
SourceKind parse_source(std::string_view name);

inline constexpr int kStudentDof = 4;
inline constexpr double kOutlierRate = 0.001;
inline constexpr double kOutlierFactor = 50.0;

/// Seeded synthetic weight source standing in for real model weights.
///
/// - gaussian: i.i.d. N(0, 1)
/// - laplace: i.i.d. Laplace with unit scale
/// - student_t: i.i.d. Student-t with 4 degrees of freedom
/// - outlier_spiked: N(0, 1) where each element is independently multiplied
///   by 50 with probability 0.001
struct SyntheticSource {
  SourceKind kind = SourceKind::gaussian;
  std::uint64_t seed = 0;
  std::size_t count = std::size_t{1} << 20;

  /// Bit-reproducible for a fixed kind, seed and count. Named after the kind.
  DenseTensor generate() const;
};

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `cdf`. Samples are sorted internally.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

struct GaussianityReport {
  double ks_before = 0.0;
  double ks_after = 0.0;
  double block_max_mean = 0.0;
  std::size_t block_count = 0;
  std::size_t sample_count = 0;
};

/// Pools sqrt(d) * (block / ||block||) coordinates over all nonzero blocks,
/// before and after the Walsh-Hadamard rotation, and compares each pool to
/// the standard normal CDF. Requires at least 100 * d elements.
GaussianityReport gaussianity_report(const DenseTensor& tensor, std::size_t d = 128);

/// Mean over nonzero blocks of max_j |z_j|, z = sqrt(d) * H * (block / ||block||).
/// Throws if the tensor is smaller than 100 * d or has no nonzero block.
double block_max_stats(const DenseTensor& tensor, std::size_t d = 128);

struct DistortionEntry {
  int bits = 0;
  double absmax_mse = 0.0;     // relative, per-block absmax at block size d
  double polar_mse = 0.0;      // relative, PolarQuant at block size d
  double lloyd_max_mse = 0.0;  // analytic unit-normal MSE of the table
  double ratio() const noexcept { return polar_mse / absmax_mse; }
};

struct DistortionReport {
  SourceKind kind = SourceKind::gaussian;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t block_size = 0;
  std::vector<DistortionEntry> entries;
};

DistortionReport distortion_bench(const SyntheticSource& source, std::span<const int> bits_list,
                                  std::size_t d = 128);

std::string to_json(const DistortionReport& report);
std::string to_json(const GaussianityReport& report, std::string_view name);

}  // namespace polarquant
