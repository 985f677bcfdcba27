#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "polarquant/gauss_quant.hpp"
#include "polarquant/hadamard.hpp"
#include "polarquant/half.hpp"
#include "polarquant/polar_codec.hpp"
#include "polarquant/rng.hpp"

using namespace polarquant;

namespace {

DenseTensor normal_tensor(std::vector<std::uint64_t> shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return DenseTensor("w", std::move(shape), std::move(v));
}

double relative_error(const DenseTensor& recon, const DenseTensor& ref) {
  return relative_mse(recon.values(), ref.values());
}

std::size_t scan_nearest(double z, const std::vector<double>& c) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    if (std::abs(z - c[k]) < std::abs(z - c[best])) best = k;
  }
  return best;
}

}  // namespace

TEST(PolarCodecTest, ZeroTensor) {
  const DenseTensor zeros("z", {256}, std::vector<float>(256, 0.0f));
  const auto q = polar_quantize(zeros, 5);
  EXPECT_EQ(q.num_blocks(), 2u);
  EXPECT_EQ(q.norms, (std::vector<std::uint16_t>{0, 0}));
  const auto zero_code = nearest_centroid(0.0, gaussian_table(5));
  for (auto c : q.codes) EXPECT_EQ(c, zero_code);
  const auto back = polar_dequantize(q);
  for (float v : back.data) EXPECT_EQ(v, 0.0f);
}

TEST(PolarCodecTest, ScaledBasisVector) {
  std::vector<float> v(128, 0.0f);
  v[0] = 5.0f;
  const auto q = polar_quantize(DenseTensor("e0", {128}, v), 5);
  ASSERT_EQ(q.num_blocks(), 1u);
  EXPECT_EQ(q.norms[0], double_to_half(5.0));
  const auto expected = nearest_centroid(1.0, gaussian_table(5));
  for (auto c : q.codes) EXPECT_EQ(c, expected);
}

TEST(PolarCodecTest, GaussianFidelityAtFiveBits) {
  const auto t = normal_tensor({1024, 1024}, 42);
  const double err = relative_error(polar_dequantize(polar_quantize(t, 5)), t);
  EXPECT_GE(err, 0.002);
  EXPECT_LE(err, 0.003);
}

TEST(PolarCodecTest, EightBitsBelowBound) {
  const auto t = normal_tensor({512, 512}, 43);
  EXPECT_LT(relative_error(polar_dequantize(polar_quantize(t, 8)), t), 3e-4);
}

TEST(PolarCodecTest, ErrorTracksAnalyticMse) {
  const auto t = normal_tensor({256, 1024}, 44);
  double previous = 1.0;
  for (int b = 2; b <= 5; ++b) {
    const double err = relative_error(polar_dequantize(polar_quantize(t, b)), t);
    EXPECT_LT(err, previous) << b;
    previous = err;
    if (b >= 3) {
      const double analytic = quantizer_mse(solve_centroids(b));
      EXPECT_GE(err, 0.8 * analytic) << b;
      EXPECT_LE(err, 1.2 * analytic) << b;
    }
  }
}

TEST(PolarCodecTest, BlockNormMatchesScalarOracle) {
  const auto t = normal_tensor({4, 128}, 45);
  const CentroidTable& table = gaussian_table(4);
  const auto q = polar_quantize(t, table);
  const auto back = polar_dequantize(q, table);
  const double d = 128;
  for (std::size_t blk = 0; blk < 4; ++blk) {
    std::span<const float> block(t.data.data() + blk * 128, 128);
    std::vector<double> z(128);
    block_forward(block, z);
    double zhat_sq = 0;
    for (std::size_t j = 0; j < 128; ++j) {
      const std::size_t k = scan_nearest(z[j], table.centroids);
      EXPECT_EQ(q.codes[blk * 128 + j], k);
      zhat_sq += table.centroids[k] * table.centroids[k];
    }
    const double expected = half_to_float(q.norms[blk]) * std::sqrt(zhat_sq) / std::sqrt(d);
    double recon_sq = 0;
    for (std::size_t j = 0; j < 128; ++j) recon_sq += double(back.data[blk * 128 + j]) * back.data[blk * 128 + j];
    EXPECT_NEAR(std::sqrt(recon_sq), expected, 1e-5 * expected);
  }
}

TEST(PolarCodecTest, IdentityQuantizerRoundTrip) {
  Rng rng(46);
  for (std::size_t d : {8u, 128u, 1024u}) {
    std::vector<float> block(d);
    for (auto& x : block) x = static_cast<float>(rng.normal() * 3.0);
    std::vector<double> z(d);
    const double norm = block_forward(block, z);
    double zz = 0;
    for (double v : z) zz += v * v;
    EXPECT_NEAR(zz, static_cast<double>(d), 1e-9 * d);
    std::vector<float> out(d);
    block_inverse(z, norm, out);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < d; ++i) {
      num += (double(out[i]) - block[i]) * (double(out[i]) - block[i]);
      den += double(block[i]) * block[i];
    }
    EXPECT_LT(std::sqrt(num / den), 1e-6);
  }
}

TEST(PolarCodecTest, ScaleCovariance) {
  const auto t = normal_tensor({32, 128}, 47);
  const auto base = polar_quantize(t, 4);
  for (float alpha : {0.001f, 0.5f, 3.7f, 1024.0f}) {
    DenseTensor scaled = t;
    for (auto& x : scaled.data) x *= alpha;
    const auto q = polar_quantize(scaled, 4);
    EXPECT_EQ(q.codes, base.codes) << alpha;
    if (alpha == 0.5f || alpha == 1024.0f) {
      for (std::size_t i = 0; i < q.norms.size(); ++i) {
        EXPECT_EQ(half_to_float(q.norms[i]), alpha * half_to_float(base.norms[i]));
      }
    }
  }
}

TEST(PolarCodecTest, Determinism) {
  const auto t = normal_tensor({64, 200}, 48);
  EXPECT_EQ(polar_quantize(t, 3), polar_quantize(t, 3));
  const auto q = polar_quantize(t, 3);
  EXPECT_EQ(polar_dequantize(q), polar_dequantize(q));
}

TEST(PolarCodecTest, PaddingIsDropped) {
  const auto t = normal_tensor({3, 100}, 49);
  const auto q = polar_quantize(t, 5);
  EXPECT_EQ(q.num_blocks(), 3u);
  EXPECT_EQ(q.codes.size(), 384u);
  EXPECT_EQ(q.original_len, 300u);
  const auto back = polar_dequantize(q);
  EXPECT_EQ(back.shape, t.shape);
  EXPECT_EQ(back.name, t.name);
  EXPECT_LT(relative_error(back, t), 0.004);
}

TEST(PolarCodecTest, NormOverflowNamesBlock) {
  std::vector<float> v(256, 1.0f);
  for (std::size_t i = 128; i < 256; ++i) v[i] = 6000.0f;  // norm 67882
  try {
    polar_quantize(DenseTensor("big", {256}, v), 4);
    FAIL() << "expected overflow error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("block 1"), std::string::npos) << e.what();
  }
}

TEST(PolarCodecTest, TinyNormsStayNonZero) {
  std::vector<float> v(128, 0.0f);
  v[5] = 1e-9f;
  const auto q = polar_quantize(DenseTensor("tiny", {128}, v), 4);
  EXPECT_NE(q.norms[0], 0u);
}

TEST(PolarCodecTest, RejectsBadInput) {
  DenseTensor bad;
  bad.name = "w";
  bad.shape = {128};
  bad.data.assign(128, 1.0f);
  bad.data[7] = std::nanf("");
  EXPECT_THROW(polar_quantize(bad, 4), std::invalid_argument);

  const auto t = normal_tensor({128}, 50);
  EXPECT_THROW(polar_quantize(t, 4, 96), std::invalid_argument);
  EXPECT_THROW(polar_quantize(t, 9), std::invalid_argument);

  auto q = polar_quantize(t, 4);
  EXPECT_THROW(polar_dequantize(q, gaussian_table(5)), std::invalid_argument);
  q.codes[3] = 16;
  EXPECT_THROW(polar_dequantize(q), std::invalid_argument);
}

TEST(PolarCodecTest, PassthroughIsBinary16) {
  const DenseTensor t("norm", {4}, {1.0f, 0.1f, -2.5f, 65504.0f});
  const auto q = passthrough_quantize(t);
  EXPECT_TRUE(q.is_passthrough());
  EXPECT_TRUE(q.codes.empty());
  const auto back = polar_dequantize(q);
  EXPECT_EQ(back.data[0], 1.0f);
  EXPECT_EQ(back.data[1], half_to_float(float_to_half(0.1f)));
  EXPECT_EQ(back.data[2], -2.5f);
  EXPECT_EQ(back.data[3], 65504.0f);
  EXPECT_THROW(passthrough_quantize(DenseTensor("big", {1}, {70000.0f})), std::invalid_argument);
}

TEST(ChannelScalesTest, Examples) {
  const DenseTensor w("w", {2, 2}, {1, 2, 3, 4});
  const std::vector<float> s = {2, 10};
  const auto scaled = apply_channel_scales(w, s);
  EXPECT_EQ(scaled.data, (std::vector<float>{2, 20, 6, 40}));
  const std::vector<float> ones = {1, 1};
  EXPECT_EQ(apply_channel_scales(w, ones), w);
  EXPECT_EQ(remove_channel_scales(scaled, s), w);
}

TEST(ChannelScalesTest, RoundTripWithinOneUlp) {
  Rng rng(51);
  auto w = normal_tensor({64, 96}, 52);
  std::vector<float> s(96);
  for (auto& x : s) x = static_cast<float>(std::exp(2.0 * rng.normal()));
  const auto back = remove_channel_scales(apply_channel_scales(w, s), s);
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const float a = back.data[i], b = w.data[i];
    ASSERT_TRUE(a == b || std::nextafter(b, INFINITY) == a || std::nextafter(b, -INFINITY) == a) << i;
  }
}

TEST(ChannelScalesTest, RejectsBadScales) {
  const DenseTensor w("w", {2, 2}, {1, 2, 3, 4});
  EXPECT_THROW(apply_channel_scales(w, std::vector<float>{1, 0}), std::invalid_argument);
  EXPECT_THROW(apply_channel_scales(w, std::vector<float>{1, -1}), std::invalid_argument);
  EXPECT_THROW(apply_channel_scales(w, std::vector<float>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(apply_channel_scales(w, std::vector<float>{1, INFINITY}), std::invalid_argument);
  const DenseTensor flat("v", {4}, {1, 2, 3, 4});
  EXPECT_THROW(apply_channel_scales(flat, std::vector<float>{1, 1, 1, 1}), std::invalid_argument);
}

TEST(ChannelScalesTest, StoredAndRemovedOnDequantize) {
  Rng rng(53);
  const auto w = normal_tensor({128, 128}, 54);
  std::vector<float> s(128);
  for (auto& x : s) x = static_cast<float>(0.5 + rng.uniform());
  const auto q = polar_quantize(w, 6, 128, std::span<const float>(s));
  ASSERT_TRUE(q.channel_scales.has_value());
  EXPECT_EQ(*q.channel_scales, s);
  const auto back = polar_dequantize(q);
  EXPECT_LT(relative_error(back, w), 3 * quantizer_mse(gaussian_table(6)));
}

TEST(BitAllocationTest, RoleTable) {
  EXPECT_EQ(allocate_bits(TensorRole::mlp_gate_up), 3);
  EXPECT_EQ(allocate_bits(TensorRole::mlp_down), 4);
  EXPECT_EQ(allocate_bits(TensorRole::attn_qkv), 5);
  EXPECT_EQ(allocate_bits(TensorRole::attn_o), 6);
  EXPECT_EQ(allocate_bits(TensorRole::embedding), 5);
  EXPECT_EQ(allocate_bits(TensorRole::lm_head), 6);
  EXPECT_EQ(allocate_bits(TensorRole::keep_fp), std::nullopt);
  EXPECT_EQ(allocate_bits("lm_head"), 6);
  EXPECT_THROW(allocate_bits("mlp"), std::invalid_argument);
  for (TensorRole r : kAllRoles) EXPECT_EQ(parse_role(role_name(r)), r);
}

TEST(StorageTest, BitsPerWeight) {
  EXPECT_DOUBLE_EQ(bits_per_weight(5, 128), 5.125);
  EXPECT_DOUBLE_EQ(bits_per_weight(4, 128), 4.125);
  EXPECT_NEAR(compression_ratio(5.125), 3.122, 5e-4);
  EXPECT_NEAR(compression_ratio(4.125), 3.879, 5e-4);
  EXPECT_DOUBLE_EQ(bits_per_weight(3, 64), 3.25);
  EXPECT_THROW(bits_per_weight(1, 128), std::invalid_argument);
}

TEST(StorageTest, AverageBpwSmallLayout) {
  const std::vector<LayoutEntry> layout = {{TensorRole::mlp_gate_up, 300},
                                           {TensorRole::lm_head, 100},
                                           {TensorRole::keep_fp, 100}};
  // (300*3.125 + 100*6.125 + 100*16) / 500
  EXPECT_DOUBLE_EQ(average_bpw(layout), (937.5 + 612.5 + 1600.0) / 500.0);
  EXPECT_THROW(average_bpw(std::vector<LayoutEntry>{}), std::invalid_argument);
}

TEST(StorageTest, ReferenceLayoutHandSum) {
  // per-role parameter totals written out by hand
  const double embed = 151936.0 * 4096;
  const double head = 151936.0 * 4096;
  const double qkv = 32.0 * (4096.0 * 4096 + 2 * 4096.0 * 512);
  const double attn_o = 32.0 * 4096 * 4096;
  const double gate_up = 32.0 * 32 * 2 * 4096 * 1536;
  const double down = 32.0 * 32 * 4096 * 1536;
  const double fp = 32.0 * (2 * 4096 + 4096 * 32) + 4096;
  const double total = embed + head + qkv + attn_o + gate_up + down + fp;
  const double bits = embed * 5.125 + head * 6.125 + qkv * 5.125 + attn_o * 6.125 + gate_up * 3.125 +
                      down * 4.125 + fp * 16;
  const auto layout = reference_layout();
  EXPECT_NEAR(average_bpw(layout), bits / total, 1e-12);
  EXPECT_NEAR(average_bpw(layout), 3.7, 0.2);
  EXPECT_GT((gate_up + down) / total, 0.85);
}
