#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace polarquant {

/// A named, shaped, row-major 32-bit float weight tensor.
struct DenseTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  DenseTensor() = default;
  DenseTensor(std::string name, std::vector<std::uint64_t> shape, std::vector<float> data);

  std::size_t numel() const noexcept { return data.size(); }
  std::span<const float> values() const noexcept { return data; }

  /// Throws std::invalid_argument if product(shape) != data.size() or any value is non-finite.
  void validate() const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

/// Product of the dimensions; an empty shape denotes a scalar (1 element).
std::uint64_t shape_numel(std::span<const std::uint64_t> shape);

std::string shape_to_string(std::span<const std::uint64_t> shape);

/// ||a - b||^2 / ||b||^2 accumulated in double; `reference` is the denominator.
double relative_mse(std::span<const float> reconstruction, std::span<const float> reference);

/// Mean of (a - b)^2 in double.
double mean_squared_error(std::span<const float> a, std::span<const float> b);

}  // namespace polarquant
