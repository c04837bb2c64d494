#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "pcqa/error.hpp"
#include "pcqa/feature_extractor.hpp"
#include "pcqa/grad_check.hpp"

using namespace pcqa;
using testutil::random_tensor;

namespace {

using Td = Tensor<double>;
using Vd = Var<double>;

BackboneConfig tiny_config() {
  BackboneConfig cfg;
  cfg.stage_channels = {3, 2, 2, 4};
  cfg.stem_channels = 2;
  cfg.input_size = 32;
  return cfg;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(SmallCnn, DefaultStageShapes) {
  ParameterStore<float> store;
  Rng rng(1);
  SmallCnnBackbone<float> bb(store, BackboneConfig{}, rng);
  Rng data(2);
  const Var<float> x(random_tensor<float>({2, 3, 224, 224}, data, 0, 1));
  const auto f = bb.forward(x, {}, BnMode::Train);
  EXPECT_EQ(f.f1.shape(), (Shape{2, 16, 56, 56}));
  EXPECT_EQ(f.f4.shape(), (Shape{2, 128, 7, 7}));
}

TEST(SmallCnn, RejectsWrongInput) {
  ParameterStore<double> store;
  Rng rng(1);
  SmallCnnBackbone<double> bb(store, tiny_config(), rng);
  EXPECT_THROW(bb.forward(Vd(Td({1, 3, 64, 64})), {}, BnMode::Eval), Error);
  EXPECT_THROW(bb.forward(Vd(Td({1, 1, 32, 32})), {}, BnMode::Eval), Error);
  EXPECT_THROW(bb.forward(Vd(Td({3, 32, 32})), {}, BnMode::Eval), Error);
}

TEST(SmallCnn, ZeroInputGivesZeroBeforeAffine) {
  // zero input and zero biases keep every pre-BN activation at zero; eval BN with fresh stats keeps it there
  ParameterStore<double> store;
  Rng rng(1);
  SmallCnnBackbone<double> bb(store, tiny_config(), rng);
  const auto f = bb.forward(Vd(Td({2, 3, 32, 32})), {}, BnMode::Eval);
  for (double v : f.f1.value().storage()) EXPECT_EQ(v, 0.0);
  for (double v : f.f4.value().storage()) EXPECT_EQ(v, 0.0);
}

TEST(SmallCnn, GradientReachesFirstLayer) {
  ParameterStore<double> store;
  Rng rng(1);
  SmallCnnBackbone<double> bb(store, tiny_config(), rng);
  Rng data(3);
  const auto f = bb.forward(Vd(random_tensor<double>({2, 3, 32, 32}, data, 0, 1)), {}, BnMode::Train);
  backward(sum(f.f4 * f.f4) + sum(f.f1));
  const auto* stem = store.find("backbone.stem.conv.weight");
  ASSERT_NE(stem, nullptr);
  double g = 0;
  for (double v : stem->var.node()->grad.storage()) g += std::abs(v);
  EXPECT_GT(g, 0.0);
}

TEST(SmallCnn, FreezeFlagDisablesBackboneParameters) {
  ParameterStore<double> store;
  Rng rng(1);
  auto cfg = tiny_config();
  cfg.freeze = true;
  SmallCnnBackbone<double> bb(store, cfg, rng);
  EXPECT_TRUE(store.trainable().empty());
}

TEST(BackboneConfig, Validation) {
  auto cfg = tiny_config();
  cfg.input_size = 48;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.stage_channels[2] = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.kind = BackboneKind::FeatureMaps;
  EXPECT_THROW(cfg.validate(), Error);
}

class AttentionTest : public ::testing::Test {
 protected:
  ParameterStore<double> store;
  Rng rng{5};
  AttentionBlock<double> att{store, "att", 4, 4, rng};
};

TEST_F(AttentionTest, ZeroWeightsGiveHalf) {
  att.spatial_conv().weight.mutable_value().fill(0.0);
  att.channel_up().weight.mutable_value().fill(0.0);
  Rng data(6);
  const Td f = random_tensor<double>({2, 4, 3, 5}, data);
  const Td s = att.spatial_attention(Vd(f)).value();
  const Td c = att.channel_attention(Vd(f)).value();
  EXPECT_EQ(s.shape(), (Shape{2, 1, 3, 5}));
  EXPECT_EQ(c.shape(), (Shape{2, 4, 1, 1}));
  for (double v : s.storage()) EXPECT_EQ(v, 0.5);
  for (double v : c.storage()) EXPECT_EQ(v, 0.5);
  const Td out = att(Vd(f)).value();
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(out[i], 1.25 * f[i], 1e-15);
}

TEST_F(AttentionTest, SpatialMatchesPixelLoop) {
  Rng data(7);
  const Td f = random_tensor<double>({2, 4, 3, 3}, data);
  const Td s = att.spatial_attention(Vd(f)).value();
  const Td& w = att.spatial_conv().weight.value();
  const Td& b = att.spatial_conv().bias.value();
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) {
        double acc = b[0];
        for (std::size_t c = 0; c < 4; ++c) acc += w[c] * f.at({n, c, y, x});
        const double v = s.at({n, 0, y, x});
        EXPECT_NEAR(v, sigmoid_ref(acc), 1e-14);
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
}

TEST_F(AttentionTest, ChannelMatchesGapAndTwoConvs) {
  Rng data(8);
  const Td f = random_tensor<double>({1, 4, 2, 3}, data);
  const Td c = att.channel_attention(Vd(f)).value();
  const Td& wd = att.channel_down().weight.value();  // [1, 4, 1, 1]
  const Td& bd = att.channel_down().bias.value();
  const Td& wu = att.channel_up().weight.value();  // [4, 1, 1, 1]
  const Td& bu = att.channel_up().bias.value();
  ASSERT_EQ(wd.shape(), (Shape{1, 4, 1, 1}));
  double gap[4] = {};
  for (std::size_t ch = 0; ch < 4; ++ch) {
    for (std::size_t k = 0; k < 6; ++k) gap[ch] += f[ch * 6 + k];
    gap[ch] /= 6;
  }
  double mid = bd[0];
  for (std::size_t ch = 0; ch < 4; ++ch) mid += wd[ch] * gap[ch];
  for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_NEAR(c[ch], sigmoid_ref(wu[ch] * mid + bu[ch]), 1e-14);
}

TEST_F(AttentionTest, ConstantChannelAverage) {
  Td f({1, 4, 3, 3});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i / 9);
  const Td m = mean(Vd(f), {2, 3}, true).value();
  for (std::size_t ch = 0; ch < 4; ++ch) EXPECT_EQ(m[ch], static_cast<double>(ch));
}

TEST_F(AttentionTest, BoundedAndShapePreserving) {
  Rng data(9);
  for (int t = 0; t < 5; ++t) {
    const Td f = random_tensor<double>({3, 4, 1 + data.below(5), 1 + data.below(5)}, data, -4, 4);
    const Td out = att(Vd(f)).value();
    ASSERT_EQ(out.shape(), f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_LE(std::abs(out[i]), 2.0 * std::abs(f[i]) + 1e-15);
      EXPECT_GE(out[i] * f[i], 0.0);
    }
  }
}

TEST(AttentiveCombine, ZeroAttentionIsResidualIdentity) {
  Rng data(10);
  const Td f = random_tensor<double>({1, 3, 2, 2}, data);
  const Td out = attentive_combine(Vd(f), Vd(Td({1, 1, 2, 2})), Vd(Td({1, 3, 1, 1}))).value();
  EXPECT_EQ(out, f);
}

TEST(AttentionBlock, ReductionNeverDropsBelowOne) {
  ParameterStore<double> store;
  Rng rng(1);
  AttentionBlock<double> att(store, "a", 2, 4, rng);
  EXPECT_EQ(att.channel_down().weight.shape(), (Shape{1, 2, 1, 1}));
}

TEST(NodeVector, ConstantMapsAndDimension) {
  Td f1({2, 3, 4, 4}, 0.25), f4({2, 5, 1, 1}, -2.0);
  const Td h = node_vector(Vd(f1), Vd(f4)).value();
  ASSERT_EQ(h.shape(), (Shape{2, 8}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(h.at({b, k}), 0.25);
    for (std::size_t k = 3; k < 8; ++k) EXPECT_EQ(h.at({b, k}), -2.0);
  }
  EXPECT_THROW(node_vector(Vd(Td({2, 3, 4, 4})), Vd(Td({3, 5, 1, 1}))), Error);
}

TEST(FeatureExtractor, DefaultDimIs144) {
  ParameterStore<float> store;
  Rng rng(1);
  FeatureExtractor<float> fx(store, BackboneConfig{}, 4, rng);
  EXPECT_EQ(fx.feature_dim(), 144u);
  auto wide = BackboneConfig{};
  wide.kind = BackboneKind::FeatureMaps;
  wide.stage_channels = {256, 512, 1024, 2048};
  wide.feature_dir = "/nonexistent";
  ParameterStore<float> s2;
  FeatureExtractor<float> fx2(s2, wide, 4, rng);
  EXPECT_EQ(fx2.feature_dim(), 2304u);
}

TEST(FeatureExtractor, BatchPermutationEquivariantInEvalMode) {
  ParameterStore<double> store;
  Rng rng(2);
  FeatureExtractor<double> fx(store, tiny_config(), 4, rng);
  Rng data(3);
  const Td a = random_tensor<double>({1, 3, 32, 32}, data, 0, 1);
  const Td b = random_tensor<double>({1, 3, 32, 32}, data, 0, 1);
  const Td ab = concat<double>({Vd(a), Vd(b)}, 0).value();
  const Td ba = concat<double>({Vd(b), Vd(a)}, 0).value();
  const Td h_ab = fx.forward(Vd(ab), {}, BnMode::Eval).value();
  const Td h_ba = fx.forward(Vd(ba), {}, BnMode::Eval).value();
  const std::size_t d = fx.feature_dim();
  for (std::size_t k = 0; k < d; ++k) {
    EXPECT_EQ(h_ab[k], h_ba[d + k]);
    EXPECT_EQ(h_ab[d + k], h_ba[k]);
  }
}

TEST(FeatureExtractor, BatchPermutationEquivariantInTrainMode) {
  ParameterStore<double> store;
  Rng rng(2);
  FeatureExtractor<double> fx(store, tiny_config(), 4, rng);
  Rng data(4);
  const Td a = random_tensor<double>({1, 3, 32, 32}, data, 0, 1);
  const Td b = random_tensor<double>({1, 3, 32, 32}, data, 0, 1);
  const Td h_ab = fx.forward(concat<double>({Vd(a), Vd(b)}, 0), {}, BnMode::Train).value();
  const Td h_ba = fx.forward(concat<double>({Vd(b), Vd(a)}, 0), {}, BnMode::Train).value();
  const std::size_t d = fx.feature_dim();
  for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(h_ab[k], h_ba[d + k], 1e-12);
}

TEST(FeatureExtractor, EndToEndGradientToImage) {
  ParameterStore<double> store;
  Rng rng(2);
  FeatureExtractor<double> fx(store, tiny_config(), 4, rng);
  // warm the running stats so eval-mode BN is not the identity
  Rng data(5);
  for (int i = 0; i < 3; ++i) {
    NoGradGuard g;
    fx.forward(Vd(random_tensor<double>({2, 3, 32, 32}, data, 0, 1)), {}, BnMode::Train);
  }
  const ScalarFn<double> f = [&](const std::vector<Vd>& v) {
    const Vd h = fx.forward(v[0], {}, BnMode::Eval);
    Rng w(11);
    return sum(h * constant(random_tensor<double>(h.shape(), w)));
  };
  const auto r = grad_check<double>(f, {random_tensor<double>({2, 3, 32, 32}, data, 0, 1)}, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst_index << " " << r.analytic << " " << r.numeric;
}

TEST(FeatureMapBackbone, LoadsExportedMaps) {
  const auto dir = std::filesystem::temp_directory_path() / "pcqa_test_featmaps";
  std::filesystem::remove_all(dir);
  Rng data(12);
  const auto f1a = random_tensor<float>({3, 4, 4}, data), f4a = random_tensor<float>({4, 1, 1}, data);
  const auto f1b = random_tensor<float>({3, 4, 4}, data), f4b = random_tensor<float>({4, 1, 1}, data);
  write_feature_maps(dir, "img_a", f1a, f4a);
  write_feature_maps(dir, "img_b", f1b, f4b);

  BackboneConfig cfg = tiny_config();
  cfg.kind = BackboneKind::FeatureMaps;
  cfg.feature_dir = dir;
  FeatureMapBackbone<float> bb(cfg);
  const std::vector<std::string> keys{"img_b", "img_a"};
  const auto f = bb.forward(Var<float>(Tensor<float>({2, 3, 32, 32})), keys, BnMode::Eval);
  ASSERT_EQ(f.f1.shape(), (Shape{2, 3, 4, 4}));
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_EQ(f.f1.value()[i], f1b[i]);
    EXPECT_EQ(f.f1.value()[48 + i], f1a[i]);
  }
  EXPECT_EQ(f.f4.value()[4], f4a[0]);

  const std::vector<std::string> missing{"nope"};
  EXPECT_THROW(bb.forward(Var<float>(Tensor<float>({1, 3, 32, 32})), missing, BnMode::Eval), Error);
  BackboneConfig wrong = cfg;
  wrong.stage_channels[0] = 5;
  FeatureMapBackbone<float> bad(wrong);
  EXPECT_THROW(bad.forward(Var<float>(Tensor<float>({1, 3, 32, 32})), keys, BnMode::Eval), Error);
}
