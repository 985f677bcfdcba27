#include "polarquant/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace polarquant {

DenseTensor::DenseTensor(std::string name_, std::vector<std::uint64_t> shape_, std::vector<float> data_)
    : name(std::move(name_)), shape(std::move(shape_)), data(std::move(data_)) {
  validate();
}

void DenseTensor::validate() const {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor '" + name + "': shape " + shape_to_string(shape) +
                                " does not match " + std::to_string(data.size()) + " elements");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw std::invalid_argument("tensor '" + name + "': non-finite value at index " +
                                  std::to_string(i));
    }
  }
}

std::uint64_t shape_numel(std::span<const std::uint64_t> shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      throw std::overflow_error("shape element count overflows 64 bits");
    }
    n *= d;
  }
  return n;
}

std::string shape_to_string(std::span<const std::uint64_t> shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

double relative_mse(std::span<const float> reconstruction, std::span<const float> reference) {
  if (reconstruction.size() != reference.size()) {
    throw std::invalid_argument("relative_mse: length mismatch");
  }
  double err = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double diff = static_cast<double>(reconstruction[i]) - r;
    err += diff * diff;
    energy += r * r;
  }
  if (energy == 0.0) return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return err / energy;
}

double mean_squared_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mean_squared_error: length mismatch");
  if (a.empty()) return 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    err += diff * diff;
  }
  return err / static_cast<double>(a.size());
}

}  // namespace polarquant
