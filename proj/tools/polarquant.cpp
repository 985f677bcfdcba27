// polarquant: command-line front end for the PolarQuant toolkit.
//
// Exit codes: 0 success, 1 data or codec error, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polarquant/cascade.hpp"
#include "polarquant/container_io.hpp"
#include "polarquant/diagnostics.hpp"
#include "polarquant/gauss_quant.hpp"
#include "polarquant/half.hpp"
#include "polarquant/layout.hpp"
#include "polarquant/polar_codec.hpp"

namespace pq = polarquant;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join_reports(const std::vector<std::string>& docs) {
  std::string out = "[\n";
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::string doc = docs[i];
    while (!doc.empty() && doc.back() == '\n') doc.pop_back();
    out += doc;
    out += i + 1 < docs.size() ? ",\n" : "\n";
  }
  return out + "]\n";
}

void write_text(const std::string& path, const std::string& text) {
  pq::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double tensor_bpw(const pq::QuantizedTensor& q) {
  return q.is_passthrough() ? 16.0 : pq::bits_per_weight(q.bits, q.block_size);
}

double model_average_bpw(const std::vector<pq::QuantizedTensor>& tensors) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& q : tensors) {
    weighted += tensor_bpw(q) * static_cast<double>(q.original_len);
    total += static_cast<double>(q.original_len);
  }
  return total > 0.0 ? weighted / total : 0.0;
}

// --- quantize ---

struct QuantizeArgs {
  std::string in;
  std::string out;
  std::optional<int> bits;
  bool mixed_bit = false;
  std::string layout;
  std::size_t block_size = pq::kDefaultBlockSize;
  std::string awq_scales;
};

int run_quantize(const QuantizeArgs& a) {
  if (a.bits.has_value() == a.mixed_bit) {
    throw UsageError("quantize: pass exactly one of --bits or --mixed-bit");
  }
  if (a.mixed_bit && a.layout.empty()) throw UsageError("quantize: --mixed-bit requires --layout");
  if (!a.mixed_bit && !a.layout.empty()) throw UsageError("quantize: --layout requires --mixed-bit");
  if (a.bits && (*a.bits < 2 || *a.bits > 8)) throw UsageError("quantize: --bits must be in [2, 8]");

  const auto tensors = pq::read_rtz_tensors(a.in);
  std::optional<pq::LayoutSpec> layout;
  if (a.mixed_bit) layout = pq::LayoutSpec::load(a.layout);

  std::map<std::string, std::vector<float>> scales;
  if (!a.awq_scales.empty()) {
    for (auto& t : pq::read_rtz_tensors(a.awq_scales)) scales[t.name] = std::move(t.data);
  }

  std::vector<pq::QuantizedTensor> out;
  for (const auto& t : tensors) {
    std::optional<int> bits = a.bits;
    if (layout) bits = pq::allocate_bits(layout->resolve(t.name));
    if (!bits) {
      out.push_back(pq::passthrough_quantize(t));
    } else {
      std::optional<std::span<const float>> s;
      if (auto it = scales.find(t.name); it != scales.end()) s = std::span<const float>(it->second);
      out.push_back(pq::polar_quantize(t, pq::stored_table(*bits), a.block_size, s));
    }
    const auto& q = out.back();
    std::printf("%-40s %-16s bits=%-2s bpw=%.3f%s\n", q.name.c_str(),
                pq::shape_to_string(q.shape).c_str(),
                q.is_passthrough() ? "fp" : std::to_string(q.bits).c_str(), tensor_bpw(q),
                q.channel_scales ? " awq" : "");
  }
  const double avg = model_average_bpw(out);
  pq::write_pqz(a.out, pq::make_pqz_model(std::move(out), a.block_size));
  std::printf("average bpw %.3f (compression %.2fx vs 16-bit)\n", avg, pq::compression_ratio(avg));
  return 0;
}

// --- dequantize ---

int run_dequantize(const std::string& in, const std::string& out, const std::string& reference) {
  const pq::PqzModel model = pq::read_pqz(in);
  std::vector<pq::DenseTensor> tensors;
  for (const auto& q : model.tensors) {
    tensors.push_back(q.is_passthrough() ? pq::polar_dequantize(q)
                                         : pq::polar_dequantize(q, model.table_for(q.bits)));
  }
  pq::write_rtz(out, tensors);

  if (!reference.empty()) {
    std::map<std::string, pq::DenseTensor> ref;
    for (auto& t : pq::read_rtz_tensors(reference)) ref.emplace(t.name, std::move(t));
    for (const auto& t : tensors) {
      auto it = ref.find(t.name);
      if (it == ref.end()) throw std::runtime_error("reference has no tensor '" + t.name + "'");
      if (it->second.shape != t.shape) {
        throw std::runtime_error("reference shape mismatch for '" + t.name + "'");
      }
      std::printf("%-40s relative_error=%.6g\n", t.name.c_str(), pq::relative_mse(t.data, it->second.data));
    }
  }
  return 0;
}

// --- inspect ---

int run_inspect(const std::string& in) {
  const pq::PqzModel model = pq::read_pqz(in);
  std::printf("block_size %zu\n", model.block_size);
  std::printf("tables");
  for (const auto& t : model.tables) std::printf(" Q%d", t.bits);
  std::printf("\ntensors %zu\n", model.tensors.size());
  for (const auto& q : model.tensors) {
    const double bpw = tensor_bpw(q);
    std::printf("%-40s shape=%-16s bits=%-2s blocks=%-8zu bpw=%.3f compression=%.2fx",
                q.name.c_str(), pq::shape_to_string(q.shape).c_str(),
                q.is_passthrough() ? "fp" : std::to_string(q.bits).c_str(), q.num_blocks(), bpw,
                pq::compression_ratio(bpw));
    if (!q.norms.empty()) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      double sum = 0.0;
      for (auto h : q.norms) {
        const double n = pq::half_to_float(h);
        lo = std::min(lo, n);
        hi = std::max(hi, n);
        sum += n;
      }
      std::printf(" norm_min=%.6g norm_max=%.6g norm_mean=%.6g", lo, hi,
                  sum / static_cast<double>(q.norms.size()));
    }
    if (q.channel_scales) std::printf(" channel_scales=%zu", q.channel_scales->size());
    std::printf("\n");
  }
  const double avg = model_average_bpw(model.tensors);
  std::printf("average_bpw %.3f\ncompression %.2fx\n", avg, avg > 0 ? pq::compression_ratio(avg) : 0.0);
  return 0;
}

// --- centroids ---

int run_centroids(int bits) {
  if (bits < 2 || bits > 8) throw UsageError("centroids: --bits must be in [2, 8]");
  const pq::CentroidTable& t = pq::gaussian_table(bits);
  std::printf("bits %d levels %zu\n", t.bits, t.levels());
  for (std::size_t i = 0; i < t.levels(); ++i) std::printf("c[%zu] %+.6f\n", i, t.centroids[i]);
  std::printf("mse %.7g\n", t.mse);
  return 0;
}

// --- reports ---

std::vector<int> parse_bits_list(const std::string& text) {
  std::vector<int> bits;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int b = 0;
    try {
      std::size_t used = 0;
      b = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bench: bad bit width '" + item + "' in --bits");
    }
    if (b < 2 || b > 8) throw UsageError("bench: bit widths must be in [2, 8]");
    bits.push_back(b);
  }
  if (bits.empty()) throw UsageError("bench: --bits is empty");
  return bits;
}

int run_bench(const std::string& source, std::uint64_t seed, const std::string& bits_text,
              std::size_t count, std::size_t block_size, const std::string& out) {
  pq::SyntheticSource src;
  try {
    src.kind = pq::parse_source(source);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  src.seed = seed;
  src.count = count;
  const auto bits = parse_bits_list(bits_text);
  write_text(out, pq::to_json(pq::distortion_bench(src, bits, block_size)));
  return 0;
}

int run_cascade(const std::string& in, std::uint64_t seed, bool bf16, const std::string& out) {
  pq::CascadeOptions options;
  options.bfloat16_intermediate = bf16;
  std::vector<std::string> docs;
  for (const auto& t : pq::read_rtz_tensors(in)) {
    docs.push_back(pq::to_json(pq::compare_pipelines(t, seed, options)));
  }
  write_text(out, join_reports(docs));
  return 0;
}

int run_gaussianity(const std::string& in, std::size_t block_size, const std::string& out) {
  std::vector<std::string> docs;
  for (const auto& t : pq::read_rtz_tensors(in)) {
    if (t.numel() < 100 * block_size) {
      std::cerr << "gaussianity: skipping '" << t.name << "' (" << t.numel()
                << " elements, need " << 100 * block_size << ")\n";
      continue;
    }
    docs.push_back(pq::to_json(pq::gaussianity_report(t, block_size), t.name));
  }
  write_text(out, join_reports(docs));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PolarQuant weight quantization toolkit"};
  app.require_subcommand(1);

  QuantizeArgs qa;
  int bits_flag = 0;
  auto* quantize = app.add_subcommand("quantize", "Quantize every tensor of an .rtz file into a .pqz file");
  quantize->add_option("--in", qa.in, "Input .rtz file")->required();
  quantize->add_option("--out", qa.out, "Output .pqz file")->required();
  auto* bits_opt = quantize->add_option("--bits", bits_flag, "Uniform bit width (2-8)");
  quantize->add_flag("--mixed-bit", qa.mixed_bit, "Per-tensor bit widths from --layout");
  quantize->add_option("--layout", qa.layout, "Layout rules (JSON)");
  quantize->add_option("--block-size", qa.block_size, "Block size (power of two)");
  quantize->add_option("--awq-scales", qa.awq_scales, ".rtz file of per-column scales, keyed by tensor name");

  std::string dq_in, dq_out, dq_ref;
  auto* dequantize = app.add_subcommand("dequantize", "Reconstruct an .rtz file from a .pqz file");
  dequantize->add_option("--in", dq_in, "Input .pqz file")->required();
  dequantize->add_option("--out", dq_out, "Output .rtz file")->required();
  dequantize->add_option("--reference", dq_ref, "Original .rtz file; prints relative error per tensor");

  std::string in_path;
  auto* inspect = app.add_subcommand("inspect", "Summarize a .pqz file");
  inspect->add_option("--in", in_path, "Input .pqz file")->required();

  int table_bits = 0;
  auto* centroids = app.add_subcommand("centroids", "Print the Lloyd-Max table for N(0,1)");
  centroids->add_option("--bits", table_bits, "Bit width (2-8)")->required();

  std::string source, bits_list, report_out;
  std::uint64_t seed = 0;
  std::size_t count = std::size_t{1} << 20;
  std::size_t block_size = pq::kDefaultBlockSize;
  auto* bench = app.add_subcommand("bench", "Distortion benchmark on a synthetic source");
  bench->add_option("--source", source, "gaussian | laplace | student_t | outlier_spiked")->required();
  bench->add_option("--seed", seed, "Generator seed")->required();
  bench->add_option("--bits", bits_list, "Comma-separated bit widths")->required();
  bench->add_option("--out", report_out, "Report file")->required();
  bench->add_option("--count", count, "Number of elements");
  bench->add_option("--block-size", block_size, "Block size");

  std::string cascade_in;
  bool bf16 = false;
  auto* cascade = app.add_subcommand("cascade", "Compare direct INT4 against PolarQuant-then-INT4");
  cascade->add_option("--in", cascade_in, "Input .rtz file")->required();
  cascade->add_option("--seed", seed, "Seed recorded in the report")->required();
  cascade->add_option("--out", report_out, "Report file")->required();
  cascade->add_flag("--bf16", bf16, "Round the intermediate reconstruction to bfloat16");

  std::string gauss_in;
  auto* gaussianity = app.add_subcommand("gaussianity", "KS statistics before and after rotation");
  gaussianity->add_option("--in", gauss_in, "Input .rtz file")->required();
  gaussianity->add_option("--out", report_out, "Report file")->required();
  gaussianity->add_option("--block-size", block_size, "Block size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*quantize) {
      if (*bits_opt) qa.bits = bits_flag;
      return run_quantize(qa);
    }
    if (*dequantize) return run_dequantize(dq_in, dq_out, dq_ref);
    if (*inspect) return run_inspect(in_path);
    if (*centroids) return run_centroids(table_bits);
    if (*bench) return run_bench(source, seed, bits_list, count, block_size, report_out);
    if (*cascade) return run_cascade(cascade_in, seed, bf16, report_out);
    if (*gaussianity) return run_gaussianity(gauss_in, block_size, report_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
