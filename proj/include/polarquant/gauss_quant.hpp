#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace polarquant {

/// Sorted scalar codebook for a unit normal source.
///
/// `boundaries[i]` is the decision threshold between `centroids[i]` and
/// `centroids[i + 1]`; the outer regions extend to +-infinity.
struct CentroidTable {
  int bits = 0;
  std::vector<double> centroids;
  std::vector<double> boundaries;
  double mse = 0.0;

  std::size_t levels() const noexcept { return centroids.size(); }

  /// Builds a table from sorted centroids with midpoint boundaries and analytic MSE.
  /// `bits` is log2 of the level count, or 0 when the count is not a power of two.
  static CentroidTable from_centroids(std::vector<double> centroids);

  friend bool operator==(const CentroidTable&, const CentroidTable&) = default;
};

/// Throws std::invalid_argument if centroids are not strictly increasing or
/// the boundary list does not have levels - 1 entries in ascending order.
void validate_table(const CentroidTable& table);

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// 1 - normal_cdf(x), without cancellation for large x.
double normal_sf(double x) noexcept;

/// Probability mass of (a, b]; infinite endpoints are allowed.
double normal_mass(double a, double b) noexcept;

// From a uniform start the slowest (overall scale) mode converges linearly
// with a rate near one at high bit widths: 8 bits needs ~1.3e5 steps.
inline constexpr int kDefaultLloydMaxIterations = 250000;
inline constexpr double kDefaultLloydMaxTolerance = 1e-12;

/// Lloyd-Max quantizer for N(0, 1) at 2^bits levels.
///
/// Starts from boundaries uniform over [-4, 4] and alternates the centroid
/// update c_i = (phi(t_{i-1}) - phi(t_i)) / (Phi(t_i) - Phi(t_{i-1})) with the
/// midpoint boundary update. Stops after `max_iters` steps or once no
/// centroid moves by more than `tol` in a step. The result is symmetrized (c_i = -c_{L-1-i}
/// exactly) before boundaries and MSE are recomputed.
///
/// If `mse_history` is non-null it receives the MSE after every iteration.
CentroidTable solve_centroids(int bits, int max_iters = kDefaultLloydMaxIterations,
                              double tol = kDefaultLloydMaxTolerance,
                              std::vector<double>* mse_history = nullptr);

/// Cached solve_centroids(bits) with default settings; thread-safe.
const CentroidTable& gaussian_table(int bits);

/// One Lloyd-Max step from the given table's boundaries: new centroids from
/// the conditional means, then midpoint boundaries. No symmetrization.
CentroidTable lloyd_max_step(const CentroidTable& table);

/// Exact MSE of the table for a unit normal source, in closed form.
double quantizer_mse(const CentroidTable& table);

/// Index of the centroid nearest to z. A value exactly on a boundary maps to
/// the lower index. Throws std::invalid_argument for non-finite z.
std::uint8_t nearest_centroid(double z, const CentroidTable& table);

struct AbsmaxComparison {
  double lloyd_max_mse = 0.0;
  double absmax_mse = 0.0;
  double ratio() const noexcept { return lloyd_max_mse / absmax_mse; }
};

/// Monte Carlo comparison on i.i.d. N(0, 1) samples: per-block absmax at
/// `bits` (scale = block max |x|) against the Lloyd-Max table, same samples.
AbsmaxComparison absmax_comparison(int bits, std::size_t block_size, std::size_t n_blocks,
                                   std::uint64_t seed);

double absmax_mse_ratio(int bits, std::size_t block_size, std::size_t n_blocks, std::uint64_t seed);

}  // namespace polarquant
