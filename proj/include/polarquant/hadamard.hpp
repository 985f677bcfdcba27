#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace polarquant {

/// Normalized Walsh-Hadamard matrix of order d (a power of two), Sylvester
/// ordering. Entries are +-1/sqrt(d); the matrix is symmetric and orthogonal,
/// so it is its own inverse.
class HadamardMatrix {
 public:
  /// Builds H_d by the recursion H_1 = [1], H_2d = [[H, H], [H, -H]] / sqrt(2).
  /// Throws std::invalid_argument unless d is a power of two in [1, 2^16].
  explicit HadamardMatrix(std::size_t order);

  std::size_t order() const noexcept { return order_; }
  double operator()(std::size_t row, std::size_t col) const noexcept {
    return entries_[row * order_ + col];
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(entries_).subspan(r * order_, order_);
  }
  std::span<const double> entries() const noexcept { return entries_; }

  /// Dense matrix-vector product.
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  std::size_t order_;
  std::vector<double> entries_;
};

inline HadamardMatrix build_hadamard(std::size_t order) { return HadamardMatrix(order); }

constexpr bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

/// Unnormalized in-place butterfly: x <- sqrt(d) * H_d * x.
void walsh_hadamard_raw(std::span<double> x);

/// In-place normalized transform x <- H_d * x. The 1/sqrt(d) factor is
/// applied once after the butterfly passes.
void fwht_inplace(std::span<double> x);

std::vector<double> fwht(std::span<const double> x);

/// Applies fwht to each length-d row of a row-major N x d matrix.
std::vector<double> fwht_batch(std::span<const double> blocks, std::size_t d);

}  // namespace polarquant
