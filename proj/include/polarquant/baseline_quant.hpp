#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "polarquant/tensor.hpp"

namespace polarquant {

/// Codes and scale for one absmax-quantized block.
struct AbsmaxBlock {
  std::vector<std::int8_t> codes;
  float scale = 0.0f;
};

/// Largest code magnitude at `bits`: 2^(bits-1) - 1. Codes are symmetric;
/// -2^(bits-1) is never produced.
constexpr int absmax_max_code(int bits) noexcept { return (1 << (bits - 1)) - 1; }

/// scale = max |x|; code = round_half_away(x / scale * (2^(bits-1) - 1)).
/// An all-zero block gets scale 0 and zero codes.
AbsmaxBlock absmax_quantize(std::span<const float> block, int bits);

std::vector<float> absmax_dequantize(std::span<const std::int8_t> codes, float scale, int bits);

inline constexpr std::size_t kDefaultGroupSize = 128;

/// Group-wise absmax artifact over a row-major flattened tensor. The last
/// group is zero-padded; `original_len` drops the padding on dequantization.
struct GroupQuantTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::uint64_t original_len = 0;
  std::size_t group_size = kDefaultGroupSize;
  int bits = 4;
  std::vector<float> scales;
  std::vector<std::int8_t> codes;

  std::size_t num_groups() const noexcept { return scales.size(); }
};

GroupQuantTensor groupwise_quantize(const DenseTensor& tensor, int bits,
                                    std::size_t group_size = kDefaultGroupSize);

inline GroupQuantTensor groupwise_int4_quantize(const DenseTensor& tensor,
                                                std::size_t group_size = kDefaultGroupSize) {
  return groupwise_quantize(tensor, 4, group_size);
}

DenseTensor groupwise_dequantize(const GroupQuantTensor& g);

inline DenseTensor groupwise_int4_dequantize(const GroupQuantTensor& g) {
  return groupwise_dequantize(g);
}

}  // namespace polarquant
