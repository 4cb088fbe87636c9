#include <gtest/gtest.h>

#include <cmath>

#include "pathosyn/networks.hpp"
#include "pathosyn/tensor_bridge.hpp"
#include "pathosyn/toyworld.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::box_mask;
using pathosyn::testing::random_grid;

namespace {

NoisePredictorConfig eps_config(int res, int attn, int width = 8) {
  NoisePredictorConfig c;
  c.base_width = width;
  c.time_embed_dim = 16;
  c.resolution = res;
  c.attention_resolution = attn;
  return c;
}

SubstrateNetConfig sub_config(int res) {
  SubstrateNetConfig c;
  c.base_width = 4;
  c.resolution = res;
  return c;
}

}  // namespace

TEST(TimeEmbedding, TrigOracles) {
  const auto e = time_embedding(1.0, 4);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_NEAR(e[0], 0.841471, 5e-7);
  EXPECT_NEAR(e[1], 0.010000, 5e-7);
  EXPECT_NEAR(e[2], 0.540302, 5e-7);
  EXPECT_NEAR(e[3], 0.999950, 5e-7);
  const auto z = time_embedding(0.0, 6);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(z[static_cast<std::size_t>(k)], 0.0);
    EXPECT_EQ(z[static_cast<std::size_t>(k + 3)], 1.0);
  }
  EXPECT_EQ(time_embedding(17.0, 8), time_embedding(17.0, 8));
  EXPECT_THROW((void)time_embedding(1.0, 5), InvalidArgument);
  const auto t = time_embedding(torch::tensor({1.0, 17.0}, torch::kFloat64), 8);
  const auto ref = time_embedding(17.0, 8);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(t[1][k].item<double>(), ref[static_cast<std::size_t>(k)], 1e-15);
}

TEST(NetworkConfig, Validation) {
  EXPECT_EQ(eps_config(64, 16).levels(), 3);
  EXPECT_EQ(eps_config(32, 32).levels(), 1);
  EXPECT_THROW(eps_config(64, 24).validate(), ConfigError);
  auto s = sub_config(64);
  s.depth = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(sub_config(40).validate(), ConfigError);
  EXPECT_THROW((void)parse_norm_kind("batch"), ConfigError);
}

TEST(SubstrateNet, ShapeAndDeterminism) {
  SubstrateNet net(sub_config(64));
  initialize_parameters(*net, RngKey(1));
  const auto x = random_grid<ImageGrid<float>>(Shape{64, 64}, 1, 0, 1);
  const LesionMask m = box_mask(64, 20, 30, 25, 40);
  const auto a = estimate_substrate(net, x, m);
  EXPECT_EQ(a.shape(), (Shape{64, 64}));
  EXPECT_EQ(a, estimate_substrate(net, x, m));
  EXPECT_THROW((void)estimate_substrate(net, ImageGrid<float>(Shape{32, 32}), LesionMask(Shape{32, 32})),
               ShapeMismatch);
}

TEST(SubstrateNet, ZeroParametersGiveZeroOutput) {
  SubstrateNet net(sub_config(32));
  {
    torch::NoGradGuard guard;
    for (auto& p : net->parameters()) p.zero_();
  }
  const auto out = estimate_substrate(net, random_grid<ImageGrid<double>>(Shape{32, 32}, 2, 0, 1), box_mask(32, 4, 9, 4, 9));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(SubstrateNet, InitialisationIsKeyed) {
  SubstrateNet a(sub_config(32)), b(sub_config(32)), c(sub_config(32));
  initialize_parameters(*a, RngKey(5));
  initialize_parameters(*b, RngKey(5));
  initialize_parameters(*c, RngKey(6));
  const auto pa = a->parameters();
  const auto pb = b->parameters();
  const auto pc = c->parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    any_diff = any_diff || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(EpsNet, ShapeDeterminismAndAttentionSide) {
  EpsNet net(eps_config(64, 16));
  initialize_parameters(*net, RngKey(2));
  const auto r = random_grid<DeviationField<float>>(Shape{64, 64}, 3);
  const auto x = random_grid<ImageGrid<float>>(Shape{64, 64}, 4, 0, 1);
  const LesionMask m = box_mask(64, 10, 30, 10, 30);
  const auto a = predict_noise(net, r, x, m, 500);
  EXPECT_EQ(a.shape(), (Shape{64, 64}));
  EXPECT_EQ(a, predict_noise(net, r, x, m, 500));
  EXPECT_NE(a, predict_noise(net, r, x, m, 10));
  const auto sides = net->attention_sides();
  ASSERT_FALSE(sides.empty());
  for (auto s : sides) EXPECT_EQ(s, 16);
}

TEST(EpsNet, NoCrossBatchLeakage) {
  EpsNet net(eps_config(32, 8));
  initialize_parameters(*net, RngKey(3));
  net->to(torch::kFloat64);
  std::vector<SamplingRequest<double>> reqs;
  std::vector<DeviationField<double>> rs;
  for (int i = 0; i < 2; ++i) {
    reqs.push_back({random_grid<ImageGrid<double>>(Shape{32, 32}, 10u + i, 0, 1), box_mask(32, 4 + i, 12, 6, 20),
                    RngKey(0)});
    rs.push_back(random_grid<DeviationField<double>>(Shape{32, 32}, 20u + i));
  }
  const TorchNoisePredictor<double> pred(net);
  const auto ab = pred.predict(rs, reqs, 40);
  std::swap(rs[0], rs[1]);
  std::swap(reqs[0], reqs[1]);
  const auto ba = pred.predict(rs, reqs, 40);
  for (std::size_t k = 0; k < ab[0].size(); ++k) {
    EXPECT_NEAR(ab[0][k], ba[1][k], 1e-6);
    EXPECT_NEAR(ab[1][k], ba[0][k], 1e-6);
  }
}

TEST(EpsNet, ReceptiveFieldLocalWithoutAttentionOrNorm) {
  auto input_gradient_at_far_corner = [](bool attention, NormKind norm) {
    auto cfg = eps_config(64, 16, 4);
    cfg.attention = attention;
    cfg.norm = norm;
    EpsNet net(cfg);
    initialize_parameters(*net, RngKey(4));
    net->to(torch::kFloat64);
    auto r = torch::randn({1, 1, 64, 64}, torch::kFloat64).requires_grad_(true);
    const auto x = torch::rand({1, 1, 64, 64}, torch::kFloat64);
    const auto m = torch::ones({1, 1, 64, 64}, torch::kFloat64);
    const auto out = net->forward(r, x, m, torch::tensor({50}, torch::kInt64));
    out[0][0][0][0].backward();
    return r.grad()[0][0][63][63].item<double>();
  };
  EXPECT_EQ(input_gradient_at_far_corner(false, NormKind::none), 0.0);
  EXPECT_NE(input_gradient_at_far_corner(true, NormKind::none), 0.0);
  EXPECT_NE(input_gradient_at_far_corner(false, NormKind::group), 0.0);
}

TEST(Networks, GradientReachesEveryParameter) {
  SubstrateNet sub(sub_config(32));
  EpsNet eps(eps_config(32, 8));
  initialize_parameters(*sub, RngKey(7));
  initialize_parameters(*eps, RngKey(8));
  const auto x = torch::rand({2, 1, 32, 32});
  const auto m = (torch::rand({2, 1, 32, 32}) > 0.7).to(torch::kFloat32);
  const auto x_sub = sub->forward(x * (1 - m), 1 - m);
  const auto e = eps->forward(torch::randn({2, 1, 32, 32}) * m, x_sub, m, torch::tensor({3, 70}, torch::kInt64));
  (e.square().mean() + x_sub.square().mean()).backward();
  for (auto* net : std::initializer_list<torch::nn::Module*>{sub.get(), eps.get()}) {
    for (const auto& item : net->named_parameters()) {
      const auto g = item.value().grad();
      ASSERT_TRUE(g.defined()) << item.key();
      EXPECT_TRUE(torch::isfinite(g).all().item<bool>()) << item.key();
      EXPECT_GT(g.abs().sum().item<double>(), 0.0) << item.key();
    }
  }
}

TEST(TensorBridge, RoundTrip) {
  const auto g = random_grid<ImageGrid<double>>(Shape{5, 7}, 9);
  const auto t = to_tensor(g);
  EXPECT_EQ(t.sizes(), (std::vector<std::int64_t>{1, 1, 5, 7}));
  EXPECT_EQ(to_grid<double>(t), g);
  EXPECT_THROW((void)to_grid<double>(torch::zeros({2, 1, 5, 7})), ShapeMismatch);
}
