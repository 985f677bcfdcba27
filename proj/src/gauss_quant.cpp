#include "polarquant/gauss_quant.hpp"

#include <algorithm>
#include <array>
#include <mutex>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "polarquant/rng.hpp"

namespace polarquant {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInitHalfWidth = 4.0;

void require_bits(int bits, const char* what) {
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument(std::string(what) + ": bits must be in [2, 8], got " +
                                std::to_string(bits));
  }
}

// x * phi(x), with the limit 0 at +-infinity.
double x_pdf(double x) noexcept { return std::isinf(x) ? 0.0 : x * normal_pdf(x); }

std::vector<double> midpoints(const std::vector<double>& centroids) {
  std::vector<double> out;
  if (centroids.size() < 2) return out;
  out.reserve(centroids.size() - 1);
  for (std::size_t i = 0; i + 1 < centroids.size(); ++i) {
    out.push_back((centroids[i] + centroids[i + 1]) / 2.0);
  }
  return out;
}

double lower_edge(const std::vector<double>& boundaries, std::size_t i) {
  return i == 0 ? -kInf : boundaries[i - 1];
}
double upper_edge(const std::vector<double>& boundaries, std::size_t i) {
  return i == boundaries.size() ? kInf : boundaries[i];
}

// Conditional mean of N(0,1) on (a, b].
double conditional_mean(double a, double b) {
  const double mass = normal_mass(a, b);
  if (mass <= 0.0) {
    // Region carries no representable mass; fall back to its midpoint or edge.
    if (std::isinf(a)) return b;
    if (std::isinf(b)) return a;
    return 0.5 * (a + b);
  }
  return (normal_pdf(a) - normal_pdf(b)) / mass;
}

std::vector<double> centroids_from_boundaries(const std::vector<double>& boundaries) {
  std::vector<double> c(boundaries.size() + 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = conditional_mean(lower_edge(boundaries, i), upper_edge(boundaries, i));
  }
  return c;
}

double mse_of(const std::vector<double>& centroids, const std::vector<double>& boundaries) {
  double total = 0.0;
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const double a = lower_edge(boundaries, i);
    const double b = upper_edge(boundaries, i);
    const double c = centroids[i];
    const double m0 = normal_mass(a, b);
    const double m1 = normal_pdf(a) - normal_pdf(b);
    const double m2 = m0 + x_pdf(a) - x_pdf(b);
    total += (m2 - c * m1) - c * (m1 - c * m0);
  }
  return total;
}

}  // namespace

double normal_pdf(double x) noexcept {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double normal_mass(double a, double b) noexcept {
  if (!(b > a)) return 0.0;
  // Work in whichever tail keeps both terms small.
  if (a >= 0.0) return normal_sf(a) - normal_sf(b);
  if (b <= 0.0) return normal_cdf(b) - normal_cdf(a);
  return 1.0 - normal_cdf(a) - normal_sf(b);
}

CentroidTable CentroidTable::from_centroids(std::vector<double> centroids) {
  CentroidTable t;
  const std::size_t n = centroids.size();
  if (n != 0 && (n & (n - 1)) == 0) t.bits = std::countr_zero(n);
  t.boundaries = midpoints(centroids);
  t.centroids = std::move(centroids);
  t.mse = quantizer_mse(t);
  return t;
}

void validate_table(const CentroidTable& table) {
  if (table.centroids.empty()) throw std::invalid_argument("centroid table is empty");
  if (table.boundaries.size() + 1 != table.centroids.size()) {
    throw std::invalid_argument("centroid table has " + std::to_string(table.boundaries.size()) +
                                " boundaries for " + std::to_string(table.centroids.size()) +
                                " centroids");
  }
  for (double c : table.centroids) {
    if (!std::isfinite(c)) throw std::invalid_argument("centroid table has a non-finite centroid");
  }
  for (std::size_t i = 0; i + 1 < table.centroids.size(); ++i) {
    if (!(table.centroids[i] < table.centroids[i + 1])) {
      throw std::invalid_argument("centroids are not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
  for (std::size_t i = 0; i + 1 < table.boundaries.size(); ++i) {
    if (!(table.boundaries[i] <= table.boundaries[i + 1])) {
      throw std::invalid_argument("boundaries are not ascending at index " + std::to_string(i));
    }
  }
}

CentroidTable lloyd_max_step(const CentroidTable& table) {
  CentroidTable next;
  next.bits = table.bits;
  next.centroids = centroids_from_boundaries(table.boundaries);
  next.boundaries = midpoints(next.centroids);
  next.mse = mse_of(next.centroids, next.boundaries);
  return next;
}

CentroidTable solve_centroids(int bits, int max_iters, double tol, std::vector<double>* mse_history) {
  require_bits(bits, "solve_centroids");
  if (max_iters < 1) throw std::invalid_argument("solve_centroids: max_iters must be >= 1");

  const std::size_t levels = std::size_t{1} << bits;
  std::vector<double> t(levels - 1);
  for (std::size_t i = 1; i < levels; ++i) {
    t[i - 1] = -kInitHalfWidth +
               2.0 * kInitHalfWidth * static_cast<double>(i) / static_cast<double>(levels);
  }

  // Edge evaluations are shared by the two regions meeting at each boundary.
  // `tail` holds Phi(t) left of zero and 1 - Phi(t) right of it.
  std::vector<double> pdf(levels + 1, 0.0);
  std::vector<double> tail(levels + 1, 0.0);
  std::vector<double> c(levels, 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i + 1 < levels; ++i) {
      pdf[i + 1] = normal_pdf(t[i]);
      tail[i + 1] = t[i] < 0.0 ? normal_cdf(t[i]) : normal_sf(t[i]);
    }
    double displacement = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      const double a = lower_edge(t, i);
      const double b = upper_edge(t, i);
      double mass;
      if (a >= 0.0) {
        mass = tail[i] - tail[i + 1];
      } else if (b <= 0.0) {
        mass = tail[i + 1] - tail[i];
      } else {
        mass = 1.0 - tail[i] - tail[i + 1];
      }
      const double updated = mass > 0.0 ? (pdf[i] - pdf[i + 1]) / mass : conditional_mean(a, b);
      if (iter > 0) displacement = std::max(displacement, std::abs(updated - c[i]));
      c[i] = updated;
    }
    for (std::size_t i = 0; i + 1 < levels; ++i) t[i] = 0.5 * (c[i] + c[i + 1]);
    if (mse_history) mse_history->push_back(mse_of(c, t));
    if (iter > 0 && displacement <= tol) break;
  }

  // Symmetrize so that c_i = -c_{L-1-i} holds bit-exactly.
  for (std::size_t i = 0; i < levels / 2; ++i) {
    const double magnitude = 0.5 * (c[levels - 1 - i] - c[i]);
    c[i] = -magnitude;
    c[levels - 1 - i] = magnitude;
  }
  CentroidTable table;
  table.bits = bits;
  table.boundaries = midpoints(c);
  table.centroids = std::move(c);
  table.mse = quantizer_mse(table);
  return table;
}

const CentroidTable& gaussian_table(int bits) {
  require_bits(bits, "gaussian_table");
  static std::array<std::once_flag, 9> once;
  static std::array<CentroidTable, 9> tables;
  std::call_once(once[bits], [bits] { tables[bits] = solve_centroids(bits); });
  return tables[bits];
}

double quantizer_mse(const CentroidTable& table) {
  validate_table(table);
  return mse_of(table.centroids, table.boundaries);
}

std::uint8_t nearest_centroid(double z, const CentroidTable& table) {
  if (!std::isfinite(z)) throw std::invalid_argument("nearest_centroid: non-finite input");
  if (table.centroids.size() > 256) {
    throw std::invalid_argument("nearest_centroid: table has more than 256 levels");
  }
  // First boundary >= z; a tie therefore stays in the lower region.
  const auto it = std::lower_bound(table.boundaries.begin(), table.boundaries.end(), z);
  return static_cast<std::uint8_t>(it - table.boundaries.begin());
}

AbsmaxComparison absmax_comparison(int bits, std::size_t block_size, std::size_t n_blocks,
                                   std::uint64_t seed) {
  require_bits(bits, "absmax_mse_ratio");
  if (block_size < 2) throw std::invalid_argument("absmax_mse_ratio: block_size must be >= 2");
  if (n_blocks < 1) throw std::invalid_argument("absmax_mse_ratio: n_blocks must be >= 1");

  const CentroidTable table = solve_centroids(bits);
  const double max_code = static_cast<double>((1 << (bits - 1)) - 1);

  Rng rng(seed);
  std::vector<double> block(block_size);
  double err_lm = 0.0;
  double err_abs = 0.0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    double scale = 0.0;
    for (auto& x : block) {
      x = rng.normal();
      scale = std::max(scale, std::abs(x));
    }
    for (double x : block) {
      const double q = table.centroids[nearest_centroid(x, table)];
      err_lm += (x - q) * (x - q);
      const double code = std::round(x / scale * max_code);  // std::round is half-away-from-zero
      const double r = code / max_code * scale;
      err_abs += (x - r) * (x - r);
    }
  }
  const double n = static_cast<double>(block_size * n_blocks);
  return {err_lm / n, err_abs / n};
}

double absmax_mse_ratio(int bits, std::size_t block_size, std::size_t n_blocks, std::uint64_t seed) {
  return absmax_comparison(bits, block_size, n_blocks, seed).ratio();
}

}  // namespace polarquant
