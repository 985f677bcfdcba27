#include "polarquant/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "polarquant/baseline_quant.hpp"
#include "polarquant/gauss_quant.hpp"
#include "polarquant/hadamard.hpp"
#include "polarquant/polar_codec.hpp"
#include "polarquant/rng.hpp"

namespace polarquant {
namespace {

void require_diagnostic_size(const DenseTensor& tensor, std::size_t d) {
  if (!is_power_of_two(d)) throw std::invalid_argument("block size must be a power of two");
  if (tensor.numel() < 100 * d) {
    throw std::invalid_argument("tensor '" + tensor.name + "' has " +
                                std::to_string(tensor.numel()) + " elements; need at least " +
                                std::to_string(100 * d) + " for block statistics");
  }
}

// Calls fn(normalized, rotated) for every nonzero full or padded block;
// both spans are already scaled by sqrt(d).
template <typename Fn>
std::size_t for_each_block(const DenseTensor& tensor, std::size_t d, Fn&& fn) {
  const std::size_t n_blocks = (tensor.numel() + d - 1) / d;
  const double root_d = std::sqrt(static_cast<double>(d));
  std::vector<float> block(d);
  std::vector<double> normalized(d);
  std::vector<double> rotated(d);
  std::size_t used = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * d;
    const std::size_t count = std::min(d, tensor.numel() - begin);
    std::fill(block.begin(), block.end(), 0.0f);
    std::copy_n(tensor.data.begin() + static_cast<std::ptrdiff_t>(begin), count, block.begin());
    const double norm = block_forward(block, rotated);
    if (norm == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) normalized[j] = root_d * block[j] / norm;
    fn(std::span<const double>(normalized), std::span<const double>(rotated));
    ++used;
  }
  return used;
}

}  // namespace

std::string_view source_name(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::gaussian: return "gaussian";
    case SourceKind::laplace: return "laplace";
    case SourceKind::student_t: return "student_t";
    case SourceKind::outlier_spiked: return "outlier_spiked";
  }
  return "unknown";
}

SourceKind parse_source(std::string_view name) {
  for (auto kind : {SourceKind::gaussian, SourceKind::laplace, SourceKind::student_t,
                    SourceKind::outlier_spiked}) {
    if (source_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown source kind '" + std::string(name) + "'");
}

DenseTensor SyntheticSource::generate() const {
  if (count == 0) throw std::invalid_argument("synthetic source needs at least one element");
  Rng rng(seed);
  std::vector<float> data(count);
  for (auto& v : data) {
    double x = 0.0;
    switch (kind) {
      case SourceKind::gaussian: x = rng.normal(); break;
      case SourceKind::laplace: x = rng.laplace(); break;
      case SourceKind::student_t: x = rng.student_t(kStudentDof); break;
      case SourceKind::outlier_spiked:
        x = rng.normal();
        if (rng.uniform() < kOutlierRate) x *= kOutlierFactor;
        break;
    }
    v = static_cast<float>(x);
  }
  return DenseTensor(std::string(source_name(kind)), {count}, std::move(data));
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  for (double x : samples) {
    if (!std::isfinite(x)) throw std::invalid_argument("ks_statistic: non-finite sample");
  }
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    d = std::max({d, std::abs(above), std::abs(below)});
  }
  return d;
}

GaussianityReport gaussianity_report(const DenseTensor& tensor, std::size_t d) {
  require_diagnostic_size(tensor, d);
  std::vector<double> before;
  std::vector<double> after;
  before.reserve(tensor.numel() + d);
  after.reserve(tensor.numel() + d);
  double max_sum = 0.0;
  const std::size_t used =
      for_each_block(tensor, d, [&](std::span<const double> raw, std::span<const double> z) {
        before.insert(before.end(), raw.begin(), raw.end());
        after.insert(after.end(), z.begin(), z.end());
        double m = 0.0;
        for (double v : z) m = std::max(m, std::abs(v));
        max_sum += m;
      });
  if (used == 0) throw std::invalid_argument("tensor '" + tensor.name + "' has no nonzero block");

  GaussianityReport report;
  report.block_count = used;
  report.sample_count = after.size();
  report.block_max_mean = max_sum / static_cast<double>(used);
  report.ks_before = ks_statistic(std::move(before), normal_cdf);
  report.ks_after = ks_statistic(std::move(after), normal_cdf);
  return report;
}

double block_max_stats(const DenseTensor& tensor, std::size_t d) {
  require_diagnostic_size(tensor, d);
  double max_sum = 0.0;
  const std::size_t used =
      for_each_block(tensor, d, [&](std::span<const double>, std::span<const double> z) {
        double m = 0.0;
        for (double v : z) m = std::max(m, std::abs(v));
        max_sum += m;
      });
  if (used == 0) throw std::invalid_argument("tensor '" + tensor.name + "' has no nonzero block");
  return max_sum / static_cast<double>(used);
}

DistortionReport distortion_bench(const SyntheticSource& source, std::span<const int> bits_list,
                                  std::size_t d) {
  if (bits_list.empty()) throw std::invalid_argument("distortion_bench: empty bit list");
  const DenseTensor tensor = source.generate();

  DistortionReport report;
  report.kind = source.kind;
  report.seed = source.seed;
  report.count = source.count;
  report.block_size = d;
  for (int bits : bits_list) {
    DistortionEntry entry;
    entry.bits = bits;
    entry.lloyd_max_mse = gaussian_table(bits).mse;
    entry.absmax_mse = relative_mse(
        groupwise_dequantize(groupwise_quantize(tensor, bits, d)).data, tensor.data);
    entry.polar_mse =
        relative_mse(polar_dequantize(polar_quantize(tensor, bits, d)).data, tensor.data);
    report.entries.push_back(entry);
  }
  return report;
}

std::string to_json(const DistortionReport& r) {
  nlohmann::ordered_json j;
  j["source"] = source_name(r.kind);
  j["seed"] = r.seed;
  j["element_count"] = r.count;
  j["block_size"] = r.block_size;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : r.entries) {
    nlohmann::ordered_json row;
    row["bits"] = e.bits;
    row["absmax_mse"] = e.absmax_mse;
    row["polar_mse"] = e.polar_mse;
    row["polar_absmax_ratio"] = e.ratio();
    row["lloyd_max_mse"] = e.lloyd_max_mse;
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string to_json(const GaussianityReport& r, std::string_view name) {
  nlohmann::ordered_json j;
  j["tensor"] = name;
  j["ks_before"] = r.ks_before;
  j["ks_after"] = r.ks_after;
  j["block_max_mean"] = r.block_max_mean;
  j["block_count"] = r.block_count;
  j["sample_count"] = r.sample_count;
  return j.dump(2) + "\n";
}

}  // namespace polarquant
