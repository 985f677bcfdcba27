#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polarquant/gauss_quant.hpp"
#include "polarquant/tensor.hpp"

namespace polarquant {

inline constexpr std::size_t kDefaultBlockSize = 128;

/// Reserved bit width marking a tensor stored as raw binary16 (not quantized).
inline constexpr int kPassthroughBits = 0;

/// PolarQuant artifact for one tensor.
///
/// For quantized tensors (bits in [2, 8]) there is one code byte per padded
/// weight and one binary16 norm per block. Passthrough tensors (bits == 0)
/// carry `half_values` instead and no codes, norms or channel scales.
struct QuantizedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::uint64_t original_len = 0;
  int bits = 0;
  std::size_t block_size = kDefaultBlockSize;
  std::vector<std::uint8_t> codes;
  std::vector<std::uint16_t> norms;
  /// One multiplier per column (last dimension), divided out on dequantization.
  std::optional<std::vector<float>> channel_scales;
  std::vector<std::uint16_t> half_values;

  bool is_passthrough() const noexcept { return bits == kPassthroughBits; }
  std::size_t num_blocks() const noexcept { return norms.size(); }

  /// Checks every structural invariant; throws std::invalid_argument naming the violation.
  void validate() const;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

/// Quantizes `tensor` with the Lloyd-Max table for `table.bits`.
///
/// The tensor is flattened row-major and zero-padded to a multiple of
/// `block_size`. Each block's l2 norm is accumulated in double and stored
/// as binary16 (round-to-nearest-even); the block is normalized, rotated by
/// the Walsh-Hadamard transform, scaled by sqrt(block_size) and mapped to
/// nearest centroids. Zero blocks get norm 0 and the code of 0.0.
///
/// If `channel_scales` is given, columns are multiplied by the scales before
/// quantization and the scales are stored with the result.
QuantizedTensor polar_quantize(const DenseTensor& tensor, const CentroidTable& table,
                               std::size_t block_size = kDefaultBlockSize,
                               std::optional<std::span<const float>> channel_scales = std::nullopt);

/// Convenience overload using the cached table for `bits`.
QuantizedTensor polar_quantize(const DenseTensor& tensor, int bits,
                               std::size_t block_size = kDefaultBlockSize,
                               std::optional<std::span<const float>> channel_scales = std::nullopt);

/// Stores a tensor unquantized as binary16.
QuantizedTensor passthrough_quantize(const DenseTensor& tensor);

/// Inverse of polar_quantize: centroid lookup, 1/sqrt(d), inverse rotation,
/// norm restore, padding removal, then channel scales are divided out.
/// `table` is ignored for passthrough tensors.
DenseTensor polar_dequantize(const QuantizedTensor& q, const CentroidTable& table);
DenseTensor polar_dequantize(const QuantizedTensor& q);

/// Block-level forward map without quantization: writes
/// z = sqrt(d) * H * (block / ||block||) and returns ||block|| (double).
/// A zero block yields z = 0 and norm 0.
double block_forward(std::span<const float> block, std::span<double> z);

/// Inverse of block_forward: out = norm * H * z / sqrt(d).
void block_inverse(std::span<const double> z, double norm, std::span<float> out);

/// l2 norm with compensated (Neumaier) summation of squares in double.
double block_norm(std::span<const float> block) noexcept;

/// W * diag(s): column j (last dimension) multiplied by scales[j]. The
/// tensor must be 2-D and the scales finite and strictly positive.
DenseTensor apply_channel_scales(const DenseTensor& tensor, std::span<const float> scales);
DenseTensor remove_channel_scales(const DenseTensor& tensor, std::span<const float> scales);

// Mixed-bit allocation by tensor role.

enum class TensorRole { mlp_gate_up, mlp_down, attn_qkv, attn_o, embedding, lm_head, keep_fp };

inline constexpr TensorRole kAllRoles[] = {TensorRole::mlp_gate_up, TensorRole::mlp_down,
                                           TensorRole::attn_qkv,    TensorRole::attn_o,
                                           TensorRole::embedding,   TensorRole::lm_head,
                                           TensorRole::keep_fp};

std::string_view role_name(TensorRole role) noexcept;
/// Throws std::invalid_argument for an unknown role string.
TensorRole parse_role(std::string_view name);

/// Bit width for a role; std::nullopt for keep_fp (stays full precision).
std::optional<int> allocate_bits(TensorRole role) noexcept;
std::optional<int> allocate_bits(std::string_view role);

/// Logical storage cost: bits + 16 / block_size (one binary16 norm per block).
double bits_per_weight(int bits, std::size_t block_size = kDefaultBlockSize);
inline double compression_ratio(double bpw) { return 16.0 / bpw; }

struct LayoutEntry {
  TensorRole role;
  std::uint64_t param_count;
};

/// Parameter-weighted mean bpw; keep_fp tensors count 16.
double average_bpw(std::span<const LayoutEntry> layout, std::size_t block_size = kDefaultBlockSize);

/// Reference layout for mixed-bit accounting: a mixture-of-experts decoder
/// with 32 layers, hidden size 4096, 32 SwiGLU experts of width 1536 per
/// layer, grouped-query attention with 512-wide K/V heads, a 151936-token
/// vocabulary with an untied LM head, and full-precision norms and routers.
/// About 89% of its parameters sit in the MLP projections.
std::vector<LayoutEntry> reference_layout();

}  // namespace polarquant
