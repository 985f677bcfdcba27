#include "polarquant/cascade.hpp"

#include <bit>
#include <cmath>

#include <json.hpp>

#include "polarquant/polar_codec.hpp"

namespace polarquant {

float round_to_bfloat16(float value) noexcept {
  if (!std::isfinite(value)) return value;
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  bits &= 0xffff0000u;
  return std::bit_cast<float>(bits);
}

DenseTensor cascade_quantize(const DenseTensor& tensor, int pre_bits, const CascadeOptions& options) {
  DenseTensor intermediate = polar_dequantize(polar_quantize(tensor, pre_bits, options.block_size));
  if (options.bfloat16_intermediate) {
    for (auto& v : intermediate.data) v = round_to_bfloat16(v);
  }
  return groupwise_int4_dequantize(groupwise_int4_quantize(intermediate, options.group_size));
}

ScaleStats group_scale_stats(const GroupQuantTensor& g) {
  ScaleStats stats;
  if (g.scales.empty()) return stats;
  const auto n = static_cast<double>(g.scales.size());
  for (float s : g.scales) stats.mean += s;
  stats.mean /= n;
  for (float s : g.scales) stats.variance += (s - stats.mean) * (s - stats.mean);
  stats.variance /= n;
  return stats;
}

CascadeReport compare_pipelines(const DenseTensor& tensor, std::uint64_t seed,
                                const CascadeOptions& options) {
  CascadeReport report;
  report.source = tensor.name;
  report.seed = seed;
  report.element_count = tensor.numel();

  const GroupQuantTensor direct = groupwise_int4_quantize(tensor, options.group_size);
  report.direct_int4_mse = relative_mse(groupwise_int4_dequantize(direct).data, tensor.data);
  report.scales_original = group_scale_stats(direct);

  for (int pre_bits : {3, 5}) {
    DenseTensor polar = polar_dequantize(polar_quantize(tensor, pre_bits, options.block_size));
    if (options.bfloat16_intermediate) {
      for (auto& v : polar.data) v = round_to_bfloat16(v);
    }
    const GroupQuantTensor g = groupwise_int4_quantize(polar, options.group_size);
    const double polar_mse = relative_mse(polar.data, tensor.data);
    const double cascade_mse = relative_mse(groupwise_int4_dequantize(g).data, tensor.data);
    if (pre_bits == 3) {
      report.polar_q3_mse = polar_mse;
      report.cascade_q3_mse = cascade_mse;
    } else {
      report.polar_q5_mse = polar_mse;
      report.cascade_q5_mse = cascade_mse;
      report.scales_polar_q5 = group_scale_stats(g);
    }
  }
  return report;
}

std::string to_json(const CascadeReport& r) {
  nlohmann::ordered_json j;
  j["source"] = r.source;
  j["seed"] = r.seed;
  j["element_count"] = r.element_count;
  j["direct_int4_mse"] = r.direct_int4_mse;
  j["cascade_q5_mse"] = r.cascade_q5_mse;
  j["cascade_q3_mse"] = r.cascade_q3_mse;
  j["polar_q5_mse"] = r.polar_q5_mse;
  j["polar_q3_mse"] = r.polar_q3_mse;
  j["group_scale_mean_orig"] = r.scales_original.mean;
  j["group_scale_var_orig"] = r.scales_original.variance;
  j["group_scale_mean_pq"] = r.scales_polar_q5.mean;
  j["group_scale_var_pq"] = r.scales_polar_q5.variance;
  return j.dump(2) + "\n";
}

}  // namespace polarquant
