// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "polarquant/cascade.hpp"
#include "polarquant/container_io.hpp"
#include "polarquant/diagnostics.hpp"
#include "polarquant/gauss_quant.hpp"
#include "polarquant/hadamard.hpp"
#include "polarquant/polar_codec.hpp"
#include "polarquant/rng.hpp"

using namespace polarquant;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

DenseTensor normal_tensor(std::string name, std::vector<std::uint64_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return DenseTensor(std::move(name), std::move(shape), std::move(v));
}

void lloyd_max_golden(Outcome& o) {
  const auto t0 = Clock::now();
  std::vector<CentroidTable> tables;
  for (int b = 2; b <= 5; ++b) tables.push_back(solve_centroids(b));
  const double elapsed = seconds_since(t0);

  const double q2[] = {-1.5104, -0.4528, 0.4528, 1.5104};
  for (int i = 0; i < 4; ++i) {
    o.check(std::abs(tables[0].centroids[i] - q2[i]) <= 1e-3, "Q2 centroid " + std::to_string(i));
  }
  const double q3[] = {0.2451, 0.7560, 1.3440, 2.1520};
  for (int i = 0; i < 4; ++i) {
    o.check(std::abs(tables[1].centroids[4 + i] - q3[i]) <= 1e-3, "Q3 centroid " + std::to_string(4 + i));
  }
  const double mse[] = {0.1175, 0.03454, 0.009497, 0.002499};
  for (int k = 0; k < 4; ++k) {
    const double rel = std::abs(tables[k].mse - mse[k]) / mse[k];
    o.detail << " Q" << k + 2 << " mse=" << fmt(tables[k].mse, "%.7f") << " (rel " << fmt(rel, "%.1e") << ")";
    o.check(rel <= 1e-3, "Q" + std::to_string(k + 2) + " mse within 1e-3 relative of " + fmt(mse[k]));
  }
  o.detail << " time=" << fmt(elapsed, "%.3f") << "s";
  o.check(elapsed < 1.0, "runtime < 1 s");
}

void symmetry(Outcome& o) {
  double worst = 0;
  for (int b = 2; b <= 8; ++b) {
    const auto& t = gaussian_table(b);
    const std::size_t L = t.levels();
    for (std::size_t i = 0; i < L; ++i) worst = std::max(worst, std::abs(t.centroids[i] + t.centroids[L - 1 - i]));
  }
  o.detail << " max |c_i + c_(L-1-i)| over b=2..8: " << fmt(worst, "%.2e");
  o.check(worst <= 1e-9, "symmetry within 1e-9");
}

void mse_ratio(Outcome& o) {
  const auto t0 = Clock::now();
  const auto c = absmax_comparison(3, 128, 10000, kSeed);
  const double elapsed = seconds_since(t0);
  o.detail << " ratio=" << fmt(c.ratio(), "%.5f") << " (lloyd_max " << fmt(c.lloyd_max_mse) << ", absmax "
           << fmt(c.absmax_mse) << ") time=" << fmt(elapsed, "%.2f") << "s";
  o.check(c.ratio() <= 0.46, "ratio <= 0.46");
  o.check(elapsed < 10.0, "runtime < 10 s");
}

void hadamard_suite(Outcome& o) {
  Rng rng(kSeed);
  double worst_inverse = 0, worst_norm = 0, worst_dense = 0, worst_gram = 0;
  for (std::size_t d = 1; d <= 1024; d *= 2) {
    const HadamardMatrix h(d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < d; ++k) dot += h(i, k) * h(j, k);
        worst_gram = std::max(worst_gram, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    }
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x(d);
      for (auto& v : x) v = rng.normal();
      double nx = 0;
      for (double v : x) nx += v * v;
      nx = std::sqrt(nx);
      const auto y = fwht(x);
      const auto back = fwht(y);
      const auto dense = h.multiply(x);
      double ny = 0, e_inv = 0, e_dense = 0;
      for (std::size_t i = 0; i < d; ++i) {
        ny += y[i] * y[i];
        e_inv += (back[i] - x[i]) * (back[i] - x[i]);
        e_dense += (y[i] - dense[i]) * (y[i] - dense[i]);
      }
      worst_norm = std::max(worst_norm, std::abs(std::sqrt(ny) - nx) / nx);
      worst_inverse = std::max(worst_inverse, std::sqrt(e_inv) / nx);
      worst_dense = std::max(worst_dense, std::sqrt(e_dense) / nx);
    }
  }
  o.detail << " d=1..1024: self-inverse " << fmt(worst_inverse, "%.1e") << ", orthogonality "
           << fmt(worst_gram, "%.1e") << ", norm " << fmt(worst_norm, "%.1e") << ", dense "
           << fmt(worst_dense, "%.1e");
  o.check(worst_inverse <= 1e-10, "self-inverse within 1e-10");
  o.check(worst_gram <= 1e-10, "orthogonality within 1e-10");
  o.check(worst_norm <= 1e-10, "norm preservation within 1e-10");
  o.check(worst_dense <= 1e-10, "fwht equals dense product within 1e-10");
}

void codec_fidelity(Outcome& o) {
  const auto t0 = Clock::now();
  const auto w = normal_tensor("w", {1024, 1024}, kSeed);
  double previous = INFINITY;
  for (int b = 2; b <= 5; ++b) {
    const double err = relative_mse(polar_dequantize(polar_quantize(w, b)).values(), w.values());
    o.detail << " Q" << b << "=" << fmt(err, "%.5f");
    o.check(err < previous, "strict decrease at b=" + std::to_string(b));
    previous = err;
    if (b == 5) o.check(err >= 0.002 && err <= 0.003, "Q5 relative MSE in [0.002, 0.003]");
  }
  const double elapsed = seconds_since(t0);
  o.detail << " time=" << fmt(elapsed, "%.2f") << "s";
  o.check(elapsed < 30.0, "runtime < 30 s");
}

void gaussianization(Outcome& o) {
  const auto t0 = Clock::now();
  for (SourceKind k : {SourceKind::laplace, SourceKind::outlier_spiked}) {
    const auto r = gaussianity_report(SyntheticSource{k, kSeed}.generate(), 128);
    o.detail << " " << source_name(k) << ": ks_before=" << fmt(r.ks_before, "%.4f")
             << " ks_after=" << fmt(r.ks_after, "%.4f");
    o.check(r.ks_after < 0.01, std::string(source_name(k)) + " ks_after < 0.01");
  }
  const double elapsed = seconds_since(t0);
  o.detail << " time=" << fmt(elapsed, "%.2f") << "s";
  o.check(elapsed < 30.0, "runtime < 30 s");
}

void dynamic_range(Outcome& o) {
  const double m = block_max_stats(SyntheticSource{SourceKind::gaussian, kSeed}.generate(), 128);
  o.detail << " mean block max |z| = " << fmt(m, "%.4f");
  o.check(m >= 2.9 && m <= 3.3, "mean in [2.9, 3.3]");
}

void cascade_degradation(Outcome& o) {
  for (SourceKind k : {SourceKind::gaussian, SourceKind::laplace, SourceKind::student_t,
                       SourceKind::outlier_spiked}) {
    const auto r = compare_pipelines(SyntheticSource{k, kSeed}.generate(), kSeed);
    const std::string name(source_name(k));
    o.detail << " " << name << ": q3=" << fmt(r.cascade_q3_mse, "%.5f") << " q5=" << fmt(r.cascade_q5_mse, "%.5f");
    o.check(r.cascade_q3_mse > r.cascade_q5_mse, name + " cascade q3 > q5");
    o.check(r.cascade_q5_mse >= r.polar_q5_mse, name + " cascade q5 >= polar q5");
    o.check(r.cascade_q3_mse >= r.polar_q3_mse, name + " cascade q3 >= polar q3");
  }
}

void storage_accounting(Outcome& o) {
  const double q5 = bits_per_weight(5, 128);
  const double q4 = bits_per_weight(4, 128);
  const std::string ratio = fmt(compression_ratio(q5), "%.1f");
  o.detail << " Q5 " << fmt(q5) << " bpw (" << ratio << "x), Q4 " << fmt(q4) << " bpw ("
           << fmt(compression_ratio(q4), "%.1f") << "x)";
  o.check(q5 == 5.125, "bits_per_weight(5,128) == 5.125");
  o.check(ratio == "3.1", "Q5 compression reported as 3.1x");
  o.check(q4 == 4.125, "bits_per_weight(4,128) == 4.125");
}

void mixed_bit(Outcome& o) {
  const std::pair<TensorRole, std::optional<int>> table[] = {
      {TensorRole::mlp_gate_up, 3}, {TensorRole::mlp_down, 4}, {TensorRole::attn_qkv, 5},
      {TensorRole::attn_o, 6},      {TensorRole::embedding, 5}, {TensorRole::lm_head, 6},
      {TensorRole::keep_fp, std::nullopt}};
  for (const auto& [role, bits] : table) {
    o.check(allocate_bits(role) == bits, "allocation for " + std::string(role_name(role)));
  }
  const double embed = 151936.0 * 4096, head = 151936.0 * 4096;
  const double qkv = 32.0 * (4096.0 * 4096 + 2 * 4096.0 * 512);
  const double attn_o = 32.0 * 4096 * 4096;
  const double gate_up = 32.0 * 32 * 2 * 4096 * 1536;
  const double down = 32.0 * 32 * 4096 * 1536;
  const double fp = 32.0 * (2 * 4096 + 4096 * 32) + 4096;
  const double oracle = (embed * 5.125 + head * 6.125 + qkv * 5.125 + attn_o * 6.125 + gate_up * 3.125 +
                         down * 4.125 + fp * 16) /
                        (embed + head + qkv + attn_o + gate_up + down + fp);
  const double avg = average_bpw(reference_layout());
  o.detail << " reference layout average " << fmt(avg, "%.4f") << " bpw, hand sum " << fmt(oracle, "%.4f");
  o.check(std::abs(avg - oracle) <= 1e-9, "average_bpw equals hand-summed oracle");
  o.check(std::abs(avg - 3.7) <= 0.2, "average within 3.7 +/- 0.2");
}

bool rejects(const std::function<void()>& f, const std::string& fragment) {
  try {
    f();
  } catch (const FormatError& e) {
    return std::string(e.what()).find(fragment) != std::string::npos;
  }
  return false;
}

void format_roundtrips(Outcome& o) {
  const fs::path dir = fs::path(POLARQUANT_TEST_TMPDIR) / "acceptance";
  fs::create_directories(dir);

  const auto up = normal_tensor("layers.0.mlp.up_proj.weight", {64, 256}, 1);
  const auto attn = normal_tensor("layers.0.self_attn.o_proj.weight", {128, 128}, 2);
  const auto norm = normal_tensor("layers.0.input_layernorm.weight", {128}, 3);

  const std::vector<DenseTensor> dense = {up, attn, norm};
  const auto rtz_path = dir / "fixture.rtz";
  write_rtz(rtz_path, dense);
  const auto rtz_bytes = read_file_bytes(rtz_path);
  const auto rtz_back = read_rtz_tensors(rtz_path);
  write_rtz(dir / "fixture2.rtz", rtz_back);
  o.check(rtz_back == dense, ".rtz read equals written tensors");
  o.check(read_file_bytes(dir / "fixture2.rtz") == rtz_bytes, ".rtz write/read/write byte identity");

  Rng rng(4);
  std::vector<float> scales(128);
  for (auto& s : scales) s = static_cast<float>(0.5 + rng.uniform());
  std::vector<QuantizedTensor> qs;
  qs.push_back(polar_quantize(up, stored_table(3)));
  qs.push_back(polar_quantize(attn, stored_table(6), 128, std::span<const float>(scales)));
  qs.push_back(passthrough_quantize(norm));
  const auto model = make_pqz_model(std::move(qs), 128);
  const auto pqz_path = dir / "fixture.pqz";
  write_pqz(pqz_path, model);
  const auto pqz_bytes = read_file_bytes(pqz_path);
  const auto pqz_back = read_pqz(pqz_path);
  write_pqz(dir / "fixture2.pqz", pqz_back);
  o.check(pqz_back == model, ".pqz read equals written model");
  o.check(read_file_bytes(dir / "fixture2.pqz") == pqz_bytes, ".pqz write/read/write byte identity");
  o.check(pqz_back.tensors[1].channel_scales.has_value() && pqz_back.tensors[2].is_passthrough(),
          "channel scales and keep_fp tensor preserved");

  // header 10, table count 1, Q3 table 1 + 8*4, Q6 table 1 + 64*4, tensor count 4
  const std::size_t first = 305;
  const std::size_t name_len = up.name.size();
  const std::size_t bits_at = first + 2 + name_len + 1 + 16 + 8;
  const std::size_t flags_at = bits_at + 1 + 8;
  const std::size_t codes_at = flags_at + 1;
  auto corrupt = [&](std::size_t at, std::uint8_t v) {
    auto b = pqz_bytes;
    b[at] = v;
    return b;
  };
  int corrupt_ok = 0, corrupt_total = 0;
  auto expect_reject = [&](std::vector<std::uint8_t> bytes, const std::string& fragment) {
    ++corrupt_total;
    if (rejects([&] { decode_pqz(bytes); }, fragment)) {
      ++corrupt_ok;
    } else {
      o.check(false, "corruption rejected with '" + fragment + "'");
    }
  };
  o.check(pqz_bytes[bits_at] == 3, "fixture offsets");
  expect_reject(corrupt(0, 'X'), "bad magic");
  expect_reject(corrupt(4, 7), "unsupported version");
  expect_reject(std::vector<std::uint8_t>(pqz_bytes.begin(), pqz_bytes.end() - 5), "truncated");
  {
    auto b = pqz_bytes;
    b.push_back(0);
    expect_reject(b, "trailing bytes");
  }
  expect_reject(corrupt(codes_at + 17, 8), "tensor 'layers.0.mlp.up_proj.weight': code 8 out of range");
  expect_reject(corrupt(bits_at, 5), "has no centroid table");
  expect_reject(corrupt(flags_at, 4), "unknown flag bits");
  const std::size_t norms_at = codes_at + 64 * 256;
  expect_reject(corrupt(norms_at + 1, 0xfc), "norm is negative or non-finite");
  {
    auto b = rtz_bytes;
    b[2] = 'Q';
    ++corrupt_total;
    if (rejects([&] { decode_rtz(b); }, "bad magic")) ++corrupt_ok;
    else o.check(false, ".rtz bad magic rejected");
  }
  o.detail << " rtz " << rtz_bytes.size() << " B, pqz " << pqz_bytes.size() << " B, byte-identical; "
           << corrupt_ok << "/" << corrupt_total << " corruptions rejected with the expected diagnostic";
}

struct Run {
  int exit_code;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(POLARQUANT_CLI) + " " + args + " 2>&1";
  Run r{-1, {}};
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void end_to_end_cli(Outcome& o) {
  const fs::path dir = fs::path(POLARQUANT_TEST_TMPDIR) / "acceptance";
  fs::create_directories(dir);
  const auto in = dir / "cli_in.rtz";
  const auto pqz = dir / "cli.pqz";
  const auto out = dir / "cli_out.rtz";
  const std::vector<DenseTensor> dense = {normal_tensor("a.weight", {256, 256}, 11),
                                          normal_tensor("b.weight", {512, 128}, 12),
                                          normal_tensor("c.weight", {1000}, 13)};
  write_rtz(in, dense);
  constexpr int bits = 4;
  const double bound = 1.5 * quantizer_mse(gaussian_table(bits));

  const auto q = run_cli("quantize --in " + in.string() + " --out " + pqz.string() + " --bits " + std::to_string(bits));
  const auto d = run_cli("dequantize --in " + pqz.string() + " --out " + out.string() + " --reference " + in.string());
  const auto i = run_cli("inspect --in " + pqz.string());
  o.check(q.exit_code == 0, "quantize exit 0");
  o.check(d.exit_code == 0, "dequantize exit 0");
  o.check(i.exit_code == 0, "inspect exit 0");

  double worst = 0;
  int reported = 0;
  std::istringstream lines(d.out);
  for (std::string line; std::getline(lines, line);) {
    const auto pos = line.find("relative_error=");
    if (pos == std::string::npos) continue;
    ++reported;
    worst = std::max(worst, std::stod(line.substr(pos + 15)));
  }
  o.check(reported == 3, "relative error reported for every tensor");
  o.check(worst <= bound, "reported relative error within 1.5x expected MSE");
  if (d.exit_code == 0) {
    const auto back = read_rtz_tensors(out);
    bool same = back.size() == dense.size();
    for (std::size_t k = 0; same && k < back.size(); ++k) same = back[k].name == dense[k].name && back[k].shape == dense[k].shape;
    o.check(same, "names and shapes preserved");
  }
  o.check(i.out.find("shape=[256, 256]") != std::string::npos, "inspect reports original shapes");
  o.detail << " Q" << bits << " worst reported relative error " << fmt(worst, "%.5f") << " vs bound "
           << fmt(bound, "%.5f");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, void (*)(Outcome&)>> criteria = {
      {"Lloyd-Max golden values", lloyd_max_golden},
      {"Centroid symmetry", symmetry},
      {"Lloyd-Max vs absmax MSE ratio", mse_ratio},
      {"Hadamard suite", hadamard_suite},
      {"Codec fidelity", codec_fidelity},
      {"Gaussianization", gaussianization},
      {"Dynamic range", dynamic_range},
      {"Cascade degradation", cascade_degradation},
      {"Storage accounting", storage_accounting},
      {"Mixed-bit allocation", mixed_bit},
      {"Format round-trips", format_roundtrips},
      {"End-to-end CLI", end_to_end_cli},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    std::printf("%s  %s:%s\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
