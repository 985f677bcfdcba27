#pragma once

#include <cstdint>
#include <string>

#include "polarquant/baseline_quant.hpp"
#include "polarquant/tensor.hpp"

namespace polarquant {

struct CascadeOptions {
  std::size_t block_size = 128;
  std::size_t group_size = kDefaultGroupSize;
  /// Truncate the intermediate reconstruction to bfloat16 (round-to-nearest-even)
  /// instead of keeping full 32-bit precision.
  bool bfloat16_intermediate = false;
};

/// PolarQuant at `pre_bits`, dequantize, then group-wise absmax INT4 and
/// dequantize again. Returns the final reconstruction.
DenseTensor cascade_quantize(const DenseTensor& tensor, int pre_bits,
                             const CascadeOptions& options = {});

float round_to_bfloat16(float value) noexcept;

/// Mean and population variance of the group absmax scales.
struct ScaleStats {
  double mean = 0.0;
  double variance = 0.0;
};
ScaleStats group_scale_stats(const GroupQuantTensor& g);

struct CascadeReport {
  std::string source;
  std::uint64_t seed = 0;
  std::uint64_t element_count = 0;
  double direct_int4_mse = 0.0;
  double cascade_q5_mse = 0.0;
  double cascade_q3_mse = 0.0;
  double polar_q5_mse = 0.0;
  double polar_q3_mse = 0.0;
  ScaleStats scales_original;
  ScaleStats scales_polar_q5;
};

/// Relative MSE (||W - W_hat||^2 / ||W||^2) of every pipeline against the
/// original tensor, plus group-scale statistics for the original and the
/// Q5-roundtripped weights. `seed` only labels the report.
CascadeReport compare_pipelines(const DenseTensor& tensor, std::uint64_t seed,
                                const CascadeOptions& options = {});

/// Structured text (JSON) with stable field names; identical reports give identical text.
std::string to_json(const CascadeReport& report);

}  // namespace polarquant
