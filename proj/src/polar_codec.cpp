#include "polarquant/polar_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "polarquant/hadamard.hpp"
#include "polarquant/half.hpp"

namespace polarquant {
namespace {

void require_block_size(std::size_t d) {
  if (!is_power_of_two(d) || d > (std::size_t{1} << 16)) {
    throw std::invalid_argument("block size must be a power of two in [1, 65536], got " +
                                std::to_string(d));
  }
}

std::size_t blocks_for(std::uint64_t len, std::size_t d) {
  return static_cast<std::size_t>((len + d - 1) / d);
}

void require_scales(const DenseTensor& tensor, std::span<const float> scales, const char* what) {
  if (tensor.shape.size() != 2) {
    throw std::invalid_argument(std::string(what) + ": tensor '" + tensor.name + "' is not 2-D");
  }
  if (scales.size() != tensor.shape[1]) {
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(scales.size()) +
                                " scales for " + std::to_string(tensor.shape[1]) + " columns");
  }
  for (std::size_t j = 0; j < scales.size(); ++j) {
    if (!std::isfinite(scales[j]) || !(scales[j] > 0.0f)) {
      throw std::invalid_argument(std::string(what) + ": scale " + std::to_string(j) +
                                  " is not finite and positive");
    }
  }
}

// Stored norm for a block; a nonzero norm that would round to binary16 zero
// is kept at the smallest subnormal so that "norm == 0" still means "zero block".
std::uint16_t encode_norm(double norm, std::size_t block_index) {
  if (!(norm <= kHalfMax)) {
    throw std::invalid_argument("block " + std::to_string(block_index) + " norm " +
                                std::to_string(norm) + " exceeds the binary16 range (65504)");
  }
  std::uint16_t h = double_to_half(norm);
  if (h == 0 && norm > 0.0) h = 1;
  return h;
}

}  // namespace

void QuantizedTensor::validate() const {
  const std::uint64_t expected = shape_numel(shape);
  if (expected != original_len) {
    throw std::invalid_argument("tensor '" + name + "': original_len " +
                                std::to_string(original_len) + " does not match shape " +
                                shape_to_string(shape));
  }
  if (is_passthrough()) {
    if (half_values.size() != original_len || !codes.empty() || !norms.empty() ||
        channel_scales) {
      throw std::invalid_argument("tensor '" + name + "': malformed passthrough payload");
    }
    return;
  }
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument("tensor '" + name + "': bits " + std::to_string(bits) +
                                " outside [2, 8]");
  }
  require_block_size(block_size);
  const std::size_t n_blocks = blocks_for(original_len, block_size);
  if (norms.size() != n_blocks || codes.size() != n_blocks * block_size) {
    throw std::invalid_argument("tensor '" + name + "': expected " + std::to_string(n_blocks) +
                                " blocks, found " + std::to_string(norms.size()) + " norms and " +
                                std::to_string(codes.size()) + " codes");
  }
  const unsigned limit = 1u << bits;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= limit) {
      throw std::invalid_argument("tensor '" + name + "': code " + std::to_string(codes[i]) +
                                  " at index " + std::to_string(i) + " is >= 2^" +
                                  std::to_string(bits));
    }
  }
  for (std::size_t i = 0; i < norms.size(); ++i) {
    // sign bit set, or exponent all ones (inf/nan)
    if ((norms[i] & 0x8000u) || (norms[i] & 0x7c00u) == 0x7c00u) {
      throw std::invalid_argument("tensor '" + name + "': norm " + std::to_string(i) +
                                  " is negative or non-finite");
    }
  }
  if (channel_scales) {
    if (shape.size() != 2 || channel_scales->size() != shape[1]) {
      throw std::invalid_argument("tensor '" + name + "': channel scales do not match columns");
    }
    for (float s : *channel_scales) {
      if (!std::isfinite(s) || !(s > 0.0f)) {
        throw std::invalid_argument("tensor '" + name + "': channel scale not finite and positive");
      }
    }
  }
}

double block_norm(std::span<const float> block) noexcept {
  double sum = 0.0;
  double comp = 0.0;
  for (float v : block) {
    const double sq = static_cast<double>(v) * static_cast<double>(v);
    const double t = sum + sq;
    comp += std::abs(sum) >= sq ? (sum - t) + sq : (sq - t) + sum;
    sum = t;
  }
  return std::sqrt(sum + comp);
}

double block_forward(std::span<const float> block, std::span<double> z) {
  if (block.size() != z.size()) throw std::invalid_argument("block_forward: size mismatch");
  const double norm = block_norm(block);
  if (norm == 0.0) {
    std::fill(z.begin(), z.end(), 0.0);
    return 0.0;
  }
  for (std::size_t j = 0; j < block.size(); ++j) z[j] = static_cast<double>(block[j]) / norm;
  // sqrt(d) * H_d equals the unnormalized butterfly
  walsh_hadamard_raw(z);
  return norm;
}

void block_inverse(std::span<const double> z, double norm, std::span<float> out) {
  if (z.size() != out.size()) throw std::invalid_argument("block_inverse: size mismatch");
  std::vector<double> work(z.begin(), z.end());
  walsh_hadamard_raw(work);
  // H z / sqrt(d) == raw(z) / d
  const double scale = norm / static_cast<double>(z.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<float>(work[j] * scale);
}

QuantizedTensor polar_quantize(const DenseTensor& tensor, const CentroidTable& table,
                               std::size_t block_size,
                               std::optional<std::span<const float>> channel_scales) {
  require_block_size(block_size);
  if (table.bits < 2 || table.bits > 8 || table.levels() != (std::size_t{1} << table.bits)) {
    throw std::invalid_argument("polar_quantize: table does not describe a 2..8-bit codebook");
  }
  validate_table(table);
  tensor.validate();

  QuantizedTensor q;
  q.name = tensor.name;
  q.shape = tensor.shape;
  q.original_len = tensor.numel();
  q.bits = table.bits;
  q.block_size = block_size;

  DenseTensor scaled;
  const DenseTensor* source = &tensor;
  if (channel_scales) {
    scaled = apply_channel_scales(tensor, *channel_scales);
    source = &scaled;
    q.channel_scales.emplace(channel_scales->begin(), channel_scales->end());
  }

  const std::size_t n_blocks = blocks_for(q.original_len, block_size);
  q.norms.resize(n_blocks);
  q.codes.resize(n_blocks * block_size);

  const std::uint8_t zero_code = nearest_centroid(0.0, table);
  std::vector<float> block(block_size);
  std::vector<double> z(block_size);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * block_size;
    const std::size_t count = std::min<std::size_t>(block_size, q.original_len - begin);
    std::fill(block.begin(), block.end(), 0.0f);
    std::copy_n(source->data.begin() + static_cast<std::ptrdiff_t>(begin), count, block.begin());

    const double norm = block_forward(block, z);
    q.norms[b] = encode_norm(norm, b);
    std::uint8_t* out = q.codes.data() + begin;
    if (norm == 0.0) {
      std::fill_n(out, block_size, zero_code);
      continue;
    }
    for (std::size_t j = 0; j < block_size; ++j) out[j] = nearest_centroid(z[j], table);
  }
  return q;
}

QuantizedTensor polar_quantize(const DenseTensor& tensor, int bits, std::size_t block_size,
                               std::optional<std::span<const float>> channel_scales) {
  return polar_quantize(tensor, gaussian_table(bits), block_size, channel_scales);
}

QuantizedTensor passthrough_quantize(const DenseTensor& tensor) {
  tensor.validate();
  QuantizedTensor q;
  q.name = tensor.name;
  q.shape = tensor.shape;
  q.original_len = tensor.numel();
  q.bits = kPassthroughBits;
  q.half_values.resize(tensor.numel());
  for (std::size_t i = 0; i < tensor.numel(); ++i) {
    const double v = tensor.data[i];
    if (std::abs(v) > kHalfMax) {
      throw std::invalid_argument("tensor '" + tensor.name + "': value at index " +
                                  std::to_string(i) + " exceeds the binary16 range");
    }
    q.half_values[i] = double_to_half(v);
  }
  return q;
}

DenseTensor polar_dequantize(const QuantizedTensor& q, const CentroidTable& table) {
  q.validate();
  if (q.is_passthrough()) {
    std::vector<float> data(q.half_values.size());
    std::transform(q.half_values.begin(), q.half_values.end(), data.begin(), half_to_float);
    return DenseTensor(q.name, q.shape, std::move(data));
  }
  if (table.bits != q.bits || table.levels() != (std::size_t{1} << q.bits)) {
    throw std::invalid_argument("polar_dequantize: table for " + std::to_string(table.bits) +
                                " bits used with a " + std::to_string(q.bits) + "-bit tensor '" +
                                q.name + "'");
  }

  const std::size_t d = q.block_size;
  std::vector<float> data(q.codes.size());
  std::vector<double> z(d);
  for (std::size_t b = 0; b < q.num_blocks(); ++b) {
    const std::uint8_t* codes = q.codes.data() + b * d;
    for (std::size_t j = 0; j < d; ++j) z[j] = table.centroids[codes[j]];
    const double norm = half_to_float(q.norms[b]);
    block_inverse(z, norm, std::span<float>(data).subspan(b * d, d));
  }
  data.resize(q.original_len);
  DenseTensor out(q.name, q.shape, std::move(data));
  if (q.channel_scales) return remove_channel_scales(out, *q.channel_scales);
  return out;
}

DenseTensor polar_dequantize(const QuantizedTensor& q) {
  if (q.is_passthrough()) return polar_dequantize(q, CentroidTable{});
  return polar_dequantize(q, gaussian_table(q.bits));
}

DenseTensor apply_channel_scales(const DenseTensor& tensor, std::span<const float> scales) {
  require_scales(tensor, scales, "apply_channel_scales");
  DenseTensor out = tensor;
  const std::size_t cols = scales.size();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(static_cast<double>(out.data[i]) * scales[i % cols]);
  }
  out.validate();
  return out;
}

DenseTensor remove_channel_scales(const DenseTensor& tensor, std::span<const float> scales) {
  require_scales(tensor, scales, "remove_channel_scales");
  DenseTensor out = tensor;
  const std::size_t cols = scales.size();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(static_cast<double>(out.data[i]) / scales[i % cols]);
  }
  return out;
}

std::string_view role_name(TensorRole role) noexcept {
  switch (role) {
    case TensorRole::mlp_gate_up: return "mlp_gate_up";
    case TensorRole::mlp_down: return "mlp_down";
    case TensorRole::attn_qkv: return "attn_qkv";
    case TensorRole::attn_o: return "attn_o";
    case TensorRole::embedding: return "embedding";
    case TensorRole::lm_head: return "lm_head";
    case TensorRole::keep_fp: return "keep_fp";
  }
  return "unknown";
}

TensorRole parse_role(std::string_view name) {
  for (TensorRole role : kAllRoles) {
    if (role_name(role) == name) return role;
  }
  throw std::invalid_argument("unknown tensor role '" + std::string(name) + "'");
}

std::optional<int> allocate_bits(TensorRole role) noexcept {
  switch (role) {
    case TensorRole::mlp_gate_up: return 3;
    case TensorRole::mlp_down: return 4;
    case TensorRole::attn_qkv: return 5;
    case TensorRole::attn_o: return 6;
    case TensorRole::embedding: return 5;
    case TensorRole::lm_head: return 6;
    case TensorRole::keep_fp: return std::nullopt;
  }
  return std::nullopt;
}

std::optional<int> allocate_bits(std::string_view role) { return allocate_bits(parse_role(role)); }

double bits_per_weight(int bits, std::size_t block_size) {
  if (bits < 2 || bits > 8) {
    throw std::invalid_argument("bits_per_weight: bits must be in [2, 8]");
  }
  require_block_size(block_size);
  return static_cast<double>(bits) + 16.0 / static_cast<double>(block_size);
}

double average_bpw(std::span<const LayoutEntry> layout, std::size_t block_size) {
  if (layout.empty()) throw std::invalid_argument("average_bpw: empty layout");
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& entry : layout) {
    if (entry.param_count == 0) throw std::invalid_argument("average_bpw: zero parameter count");
    const auto bits = allocate_bits(entry.role);
    const double bpw = bits ? bits_per_weight(*bits, block_size) : 16.0;
    const auto n = static_cast<double>(entry.param_count);
    weighted += bpw * n;
    total += n;
  }
  return weighted / total;
}

std::vector<LayoutEntry> reference_layout() {
  constexpr std::uint64_t layers = 32;
  constexpr std::uint64_t hidden = 4096;
  constexpr std::uint64_t experts = 32;
  constexpr std::uint64_t expert_width = 1536;
  constexpr std::uint64_t kv_width = 512;
  constexpr std::uint64_t vocab = 151936;

  std::vector<LayoutEntry> layout;
  layout.push_back({TensorRole::embedding, vocab * hidden});
  for (std::uint64_t l = 0; l < layers; ++l) {
    layout.push_back({TensorRole::keep_fp, hidden});                                // input norm
    layout.push_back({TensorRole::attn_qkv, hidden * hidden + 2 * hidden * kv_width});
    layout.push_back({TensorRole::attn_o, hidden * hidden});
    layout.push_back({TensorRole::keep_fp, hidden});                                // post-attn norm
    layout.push_back({TensorRole::keep_fp, hidden * experts});                      // router
    layout.push_back({TensorRole::mlp_gate_up, experts * 2 * hidden * expert_width});
    layout.push_back({TensorRole::mlp_down, experts * hidden * expert_width});
  }
  layout.push_back({TensorRole::keep_fp, hidden});  // final norm
  layout.push_back({TensorRole::lm_head, vocab * hidden});
  return layout;
}

}  // namespace polarquant
