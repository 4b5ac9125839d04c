#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "grad_cases.hpp"
#include "sparsecd/attention.hpp"
#include "sparsecd/errors.hpp"
#include "sparsecd/ops.hpp"

using namespace sparsecd;

namespace {

SSAConfig config(std::size_t gamma, std::size_t dim, std::size_t heads = 1) {
  SSAConfig c;
  c.gamma = gamma;
  c.offset_clip = static_cast<double>(gamma);
  c.dim = dim;
  c.heads = heads;
  return c;
}

template <typename T>
OffsetField<T> zero_offsets(const Tensor<T>& f) {
  return {Tensor<T>(Shape{f.size(0), 2, f.size(2), f.size(3)}), 1.0};
}

std::vector<float> values(const TensorF& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(SSAConfig, Validation) {
  auto c = config(3, 8);
  EXPECT_THROW(c.validate(), ConfigError);
  c = config(2, 8, 3);
  EXPECT_THROW(c.validate(), ConfigError);
  c = config(1, 8);
  c.offset_clip = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(config(8, 8, 2).validate());
}

TEST(PredictOffsets, ZeroInitGivesZero) {
  Rng rng(1);
  auto f = init::normal<float>(Shape{2, 4, 6, 6}, 0, 1, rng);
  auto off = predict_offsets(f, OffsetParams<float>::zeros(4), 2.0);
  for (float v : off.values.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(off.values.shape(), (Shape{2, 2, 6, 6}));
}

TEST(PredictOffsets, ClipsLargeRawValues) {
  // Bias alone drives the raw offset to 10.
  TensorF f(Shape{1, 1, 3, 3});
  OffsetParams<float> p{TensorF(Shape{2, 1, 3, 3}), TensorF(Shape{2}, {10.0f, -10.0f})};
  auto hard = predict_offsets(f, p, 4.0, ClipMode::hard);
  auto smooth = predict_offsets(f, p, 4.0);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(hard.values.data()[i], 4.0f);
    EXPECT_EQ(hard.values.data()[9 + i], -4.0f);
    EXPECT_NEAR(smooth.values.data()[i], 4.0 * std::tanh(2.5), 1e-6);
    EXPECT_NEAR(smooth.values.data()[9 + i], -4.0 * std::tanh(2.5), 1e-6);
  }
  p.bias = TensorF(Shape{2}, {40.0f, -40.0f});
  smooth = predict_offsets(f, p, 4.0);
  EXPECT_NEAR(smooth.values.data()[0], 4.0f, 1e-3);
  EXPECT_NEAR(smooth.values.data()[9], -4.0f, 1e-3);
}

TEST(PredictOffsets, BoundedByClip) {
  Rng rng(2);
  auto f = init::normal<float>(Shape{1, 3, 5, 5}, 0, 10, rng);
  OffsetParams<float> p{init::normal<float>(Shape{2, 3, 3, 3}, 0, 5, rng), TensorF(Shape{2})};
  for (auto mode : {ClipMode::smooth, ClipMode::hard}) {
    const auto off = predict_offsets(f, p, 1.5, mode);
    for (float v : off.values.data()) {
      EXPECT_LE(std::abs(v), 1.5f);
    }
  }
  const auto none = predict_offsets(f, p, 0.0);
  for (float v : none.values.data()) EXPECT_EQ(v, 0.0f);
}

TEST(SparseShuffle, SpecFourByFourExample) {
  std::vector<float> v(16);
  std::iota(v.begin(), v.end(), 0.0f);
  TensorF f(Shape{1, 1, 4, 4}, v);
  auto s = sparse_shuffle(f, zero_offsets(f), 2);
  EXPECT_EQ(values(s.subset(0, 0)), (std::vector<float>{0, 2, 8, 10}));
  EXPECT_EQ(values(s.subset(0, 1)), (std::vector<float>{1, 3, 9, 11}));
  EXPECT_EQ(values(s.subset(1, 0)), (std::vector<float>{4, 6, 12, 14}));
  EXPECT_EQ(values(s.subset(1, 1)), (std::vector<float>{5, 7, 13, 15}));
}

TEST(SparseShuffle, GammaOneIsIdentity) {
  Rng rng(3);
  auto f = init::normal<float>(Shape{2, 3, 4, 6}, 0, 1, rng);
  auto s = sparse_shuffle(f, zero_offsets(f), 1);
  EXPECT_EQ(values(s.subset(0, 0)), values(f));
}

TEST(SparseShuffle, DegenerateWindow) {
  TensorF f(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  auto s = sparse_shuffle(f, zero_offsets(f), 2);
  EXPECT_EQ(s.subset(1, 0).item(), 3.0f);
  EXPECT_EQ(s.subset(0, 1).item(), 2.0f);
  EXPECT_EQ(s.subset_height(), 1u);
}

TEST(SparseShuffle, NonDivisibleIsGeometryError) {
  TensorF f(Shape{1, 1, 6, 6});
  EXPECT_THROW(sparse_shuffle(f, zero_offsets(f), 4), GeometryError);
  EXPECT_THROW(sparse_shuffle(f, zero_offsets(f), 3), GeometryError);
}

TEST(SparseShuffle, OffsetsFollowRowColumnConvention) {
  // Channel 0 shifts rows, channel 1 columns: subset (0, 0) at (0, 0) with
  // offsets (1, 0) reads f[1, 0].
  std::vector<float> v(16);
  std::iota(v.begin(), v.end(), 0.0f);
  TensorF f(Shape{1, 1, 4, 4}, v);
  TensorF off(Shape{1, 2, 4, 4});
  off.at({0, 0, 0, 0}) = 1.0f;
  auto s = sparse_shuffle(f, OffsetField<float>{off, 2.0}, 2);
  EXPECT_EQ(s.subset(0, 0).at({0, 0, 0, 0}), 4.0f);
  off.at({0, 0, 0, 0}) = 0.0f;
  off.at({0, 1, 0, 0}) = 0.5f;
  s = sparse_shuffle(f, OffsetField<float>{off, 2.0}, 2);
  EXPECT_EQ(s.subset(0, 0).at({0, 0, 0, 0}), 0.5f);
}

TEST(Unshuffle, RoundTripIsBitExact) {
  Rng rng(4);
  for (std::size_t gamma : {1, 2, 4}) {
    for (int trial = 0; trial < 20; ++trial) {
      auto f = init::normal<float>(Shape{2, 3, 8, 16}, 0, 1, rng);
      auto back = unshuffle(sparse_shuffle(f, zero_offsets(f), gamma));
      ASSERT_EQ(back.shape(), f.shape());
      ASSERT_EQ(values(back), values(f)) << "gamma " << gamma;
    }
  }
}

TEST(Unshuffle, EachPixelAppearsOnce) {
  std::vector<float> v(64);
  std::iota(v.begin(), v.end(), 0.0f);
  TensorF f(Shape{1, 1, 8, 8}, v);
  auto s = sparse_shuffle(f, zero_offsets(f), 4);
  auto seen = values(s.values);
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, v);
}

TEST(DenseAttention, SingleTokenIsProjectedValue) {
  Rng rng(5);
  auto p = AttentionParams<double>::init(4, rng);
  auto x = init::normal<double>(Shape{1, 4, 1, 1}, 0, 1, rng);
  TensorD weights;
  auto y = dense_attention(x, p, 2, &weights);
  for (double w : weights.data()) EXPECT_DOUBLE_EQ(w, 1.0);
  auto v = ops::conv1x1(x, p.v_weight, p.v_bias);
  auto expected = ops::conv1x1(v, p.o_weight, p.o_bias);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], expected.data()[i], 1e-12);
}

TEST(DenseAttention, PermutingTokensPermutesOutput) {
  Rng rng(6);
  auto p = AttentionParams<float>::init(8, rng);
  auto x = init::normal<float>(Shape{1, 8, 10}, 0, 1, rng);
  std::vector<std::size_t> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  TensorF xp(Shape{1, 8, 10});
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t n = 0; n < 10; ++n) xp.at({0, c, n}) = x.at({0, c, perm[n]});
  auto y = dense_attention(x, p, 2), yp = dense_attention(xp, p, 2);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t n = 0; n < 10; ++n) EXPECT_NEAR(yp.at({0, c, n}), y.at({0, c, perm[n]}), 1e-6);
}

TEST(DenseAttention, WeightRowsSumToOne) {
  Rng rng(7);
  auto p = AttentionParams<float>::init(8, rng);
  auto x = init::normal<float>(Shape{2, 8, 3, 4}, 0, 3, rng);
  TensorF w;
  dense_attention(x, p, 4, &w);
  ASSERT_EQ(w.shape(), (Shape{8, 12, 12}));
  for (std::size_t g = 0; g < 8; ++g)
    for (std::size_t i = 0; i < 12; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 12; ++j) s += w.at({g, i, j});
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  EXPECT_THROW(dense_attention(x, p, 3), DimensionError);
}

TEST(SSAForward, GammaOneZeroOffsetsEqualsDense) {
  Rng rng(8);
  const auto cfg = config(1, 16, 2);
  auto p = SSAParams<float>::init(cfg, rng);
  auto f = init::normal<float>(Shape{1, 16, 8, 8}, 0, 1, rng);
  auto a = ssa_forward(f, cfg, p), b = dense_attention(f, p.attention, 2);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-5);
}

TEST(SSAForward, ShapeContract) {
  Rng rng(9);
  for (std::size_t gamma : {2, 4, 8}) {
    const auto cfg = config(gamma, 8);
    auto p = SSAParams<float>::init(cfg, rng);
    auto f = init::normal<float>(Shape{1, 8, 64, 64}, 0, 1, rng);
    EXPECT_EQ(ssa_forward(f, cfg, p).shape(), f.shape());
  }
}

TEST(SSAForward, MacCountScalesWithGammaSquared) {
  Rng rng(10);
  auto f = init::normal<float>(Shape{1, 8, 32, 32}, 0, 1, rng);
  auto count = [&](std::size_t gamma) {
    const auto cfg = config(gamma, 8);
    auto p = SSAParams<float>::init(cfg, rng);
    AttentionMacs m;
    ScopedMacCounter counter(m);
    ssa_forward(f, cfg, p);
    return m;
  };
  const auto m1 = count(1), m2 = count(2), m4 = count(4);
  EXPECT_EQ(m1.score, 1024ull * 1024 * 8);
  EXPECT_EQ(m1.score, 16 * m4.score);
  EXPECT_EQ(m1.total(), 4 * m2.total());
  EXPECT_EQ(m2.total(), 4 * m4.total());
}

TEST(SSALayer, ZeroProjectionsAreResidualIdentity) {
  Rng rng(11);
  const auto cfg = config(2, 8);
  auto p = SSALayerParams<float>::init(cfg, rng);
  p.ssa.attention.o_weight = TensorF(Shape{8, 8});
  p.fc2_weight = TensorF(Shape{8, 32});
  auto f = init::normal<float>(Shape{1, 8, 4, 4}, 0, 1, rng);
  EXPECT_EQ(values(ssa_layer(f, cfg, p)), values(f));
}

TEST(SSALayer, FiniteOnLargeInputs) {
  Rng rng(12);
  const auto cfg = config(2, 8);
  auto p = SSALayerParams<float>::init(cfg, rng);
  auto f = init::normal<float>(Shape{1, 8, 8, 8}, 0, 1000, rng);
  const auto y = ssa_layer(f, cfg, p);
  for (float v : y.data()) ASSERT_TRUE(std::isfinite(v));
}

TEST(SSALayer, GradientOnSpecShape) {
  Rng rng(13);
  SSAConfig cfg = config(2, 8, 2);
  cfg.mlp_ratio = 2;
  auto f = init::uniform<double>(Shape{1, 8, 8, 8}, -1, 1, rng, true);
  auto p = SSALayerParams<double>::init(cfg, rng);
  sparsecd::testing::GradInstance inst{{{"f", f}}, [=] { return ssa_layer(f, cfg, p); }};
  EXPECT_LT(sparsecd::testing::gradcheck(inst, 3).max_rel_error, 1e-4);
}

TEST(SSAForward, GradientReachesOffsetParameters) {
  Rng rng(14);
  const auto cfg = config(2, 4);
  SSAParams<double> p = SSAParams<double>::init(cfg, rng);
  p.offset.bias = TensorD(Shape{2}, {0.3, -0.2}, true);  // off-lattice sample points
  auto f = init::uniform<double>(Shape{1, 4, 4, 4}, -1, 1, rng, false);
  ops::sum(ops::mul(ssa_forward(f, cfg, p), f)).backward();
  double norm = 0;
  for (double g : p.offset.weight.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}
