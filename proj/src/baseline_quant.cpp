#include "polarquant/baseline_quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace polarquant {
namespace {

void require_bits(int bits, const char* what) {
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument(std::string(what) + ": bits must be in [2, 8], got " +
                                std::to_string(bits));
  }
}

}  // namespace

AbsmaxBlock absmax_quantize(std::span<const float> block, int bits) {
  require_bits(bits, "absmax_quantize");
  if (block.empty()) throw std::invalid_argument("absmax_quantize: empty block");

  float scale = 0.0f;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (!std::isfinite(block[i])) {
      throw std::invalid_argument("absmax_quantize: non-finite value at index " + std::to_string(i));
    }
    scale = std::max(scale, std::abs(block[i]));
  }

  AbsmaxBlock out;
  out.scale = scale;
  out.codes.assign(block.size(), 0);
  if (scale == 0.0f) return out;

  const double max_code = absmax_max_code(bits);
  for (std::size_t i = 0; i < block.size(); ++i) {
    // std::round rounds halfway cases away from zero
    const double q = std::round(static_cast<double>(block[i]) / scale * max_code);
    out.codes[i] = static_cast<std::int8_t>(std::clamp(q, -max_code, max_code));
  }
  return out;
}

std::vector<float> absmax_dequantize(std::span<const std::int8_t> codes, float scale, int bits) {
  require_bits(bits, "absmax_dequantize");
  const int max_code = absmax_max_code(bits);
  std::vector<float> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] > max_code || codes[i] < -max_code) {
      throw std::invalid_argument("absmax_dequantize: code " + std::to_string(codes[i]) +
                                  " out of range at index " + std::to_string(i));
    }
    out[i] = static_cast<float>(static_cast<double>(codes[i]) / max_code * scale);
  }
  return out;
}

GroupQuantTensor groupwise_quantize(const DenseTensor& tensor, int bits, std::size_t group_size) {
  require_bits(bits, "groupwise_quantize");
  if (group_size == 0) throw std::invalid_argument("groupwise_quantize: group_size must be > 0");
  if (tensor.numel() == 0) throw std::invalid_argument("groupwise_quantize: empty tensor");
  tensor.validate();

  GroupQuantTensor g;
  g.name = tensor.name;
  g.shape = tensor.shape;
  g.original_len = tensor.numel();
  g.group_size = group_size;
  g.bits = bits;

  const std::size_t n_groups = (tensor.numel() + group_size - 1) / group_size;
  g.scales.resize(n_groups);
  g.codes.resize(n_groups * group_size);
  std::vector<float> group(group_size);
  for (std::size_t k = 0; k < n_groups; ++k) {
    const std::size_t begin = k * group_size;
    const std::size_t count = std::min(group_size, tensor.numel() - begin);
    std::fill(group.begin(), group.end(), 0.0f);
    std::copy_n(tensor.data.begin() + static_cast<std::ptrdiff_t>(begin), count, group.begin());
    AbsmaxBlock q = absmax_quantize(group, bits);
    g.scales[k] = q.scale;
    std::copy(q.codes.begin(), q.codes.end(), g.codes.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  return g;
}

DenseTensor groupwise_dequantize(const GroupQuantTensor& g) {
  const std::size_t gs = g.group_size;
  if (gs == 0 || g.codes.size() != g.scales.size() * gs ||
      g.original_len > g.codes.size() || g.original_len + gs <= g.codes.size()) {
    throw std::invalid_argument("groupwise_dequantize: inconsistent group layout for '" + g.name + "'");
  }
  std::vector<float> data;
  data.reserve(g.codes.size());
  const std::span<const std::int8_t> codes(g.codes);
  for (std::size_t k = 0; k < g.scales.size(); ++k) {
    auto block = absmax_dequantize(codes.subspan(k * gs, gs), g.scales[k], g.bits);
    data.insert(data.end(), block.begin(), block.end());
  }
  data.resize(g.original_len);
  return DenseTensor(g.name, g.shape, std::move(data));
}

}  // namespace polarquant
