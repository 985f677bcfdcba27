#include "polarquant/hadamard.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace polarquant {
namespace {

void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(n) +
                                " is not a power of two");
  }
}

}  // namespace

HadamardMatrix::HadamardMatrix(std::size_t order) : order_(order) {
  require_power_of_two(order, "build_hadamard");
  if (order > (std::size_t{1} << 16)) {
    throw std::invalid_argument("build_hadamard: order exceeds 2^16");
  }
  entries_.assign(order * order, 0.0);
  entries_[0] = 1.0;
  // Grow the unnormalized +-1 matrix in place, then scale once.
  for (std::size_t n = 1; n < order; n *= 2) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double v = entries_[r * order + c];
        entries_[r * order + c + n] = v;
        entries_[(r + n) * order + c] = v;
        entries_[(r + n) * order + c + n] = -v;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(order));
  for (auto& e : entries_) e *= scale;
}

std::vector<double> HadamardMatrix::multiply(std::span<const double> x) const {
  if (x.size() != order_) throw std::invalid_argument("HadamardMatrix::multiply: size mismatch");
  std::vector<double> out(order_, 0.0);
  for (std::size_t r = 0; r < order_; ++r) {
    double acc = 0.0;
    const double* row_ptr = entries_.data() + r * order_;
    for (std::size_t c = 0; c < order_; ++c) acc += row_ptr[c] * x[c];
    out[r] = acc;
  }
  return out;
}

void walsh_hadamard_raw(std::span<double> x) {
  const std::size_t n = x.size();
  require_power_of_two(n, "fwht");
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
}

void fwht_inplace(std::span<double> x) {
  walsh_hadamard_raw(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.size()));
  for (auto& v : x) v *= scale;
}

std::vector<double> fwht(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  fwht_inplace(out);
  return out;
}

std::vector<double> fwht_batch(std::span<const double> blocks, std::size_t d) {
  require_power_of_two(d, "fwht_batch");
  if (blocks.size() % d != 0) {
    throw std::invalid_argument("fwht_batch: input length is not a multiple of the block size");
  }
  std::vector<double> out(blocks.begin(), blocks.end());
  std::span<double> view(out);
  for (std::size_t off = 0; off < out.size(); off += d) fwht_inplace(view.subspan(off, d));
  return out;
}

}  // namespace polarquant
