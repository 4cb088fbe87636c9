#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pathosyn/evalkit.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::random_grid;

namespace {

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Two features: the sums over the left and right halves of the field.
class HalvesEncoder final : public FeatureEncoder {
 public:
  FeatureVector encode(const ImageGrid<float>& x) const override {
    FeatureVector f(2, 0.0);
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j) f[j < x.width() / 2 ? 0 : 1] += x(i, j);
    }
    return f;
  }
  std::size_t dimension() const override { return 2; }
  std::string name() const override { return "halves"; }
};

}  // namespace

TEST(Coupling, Oracles) {
  const std::vector<double> e1{1, 0};
  const std::vector<double> e2{0, 1};
  const std::vector<double> d{1, 1};
  EXPECT_EQ(cosine_coupling(e1, e2), 0.0);
  EXPECT_NEAR(cosine_coupling(d, d), 1.0, 1e-15);
  EXPECT_NEAR(cosine_coupling(e1, d), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(cosine_coupling(e1, std::vector<double>{-1, 1}), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW((void)cosine_coupling(e1, std::vector<double>{0, 0}), InvalidArgument);
}

TEST(MutualInformation, IndependentUniformsNearZero) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = u(gen);
  for (auto& v : b) v = u(gen);
  EXPECT_LT(mutual_information(a, b, 16).nats, 0.05);
}

TEST(MutualInformation, IdentityGivesLogBins) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n;
  std::vector<double> a(4096);
  for (auto& v : a) v = n(gen);
  EXPECT_NEAR(mutual_information(a, a, 16).nats, std::log(16.0), 1e-9);
  std::vector<double> neg(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) neg[k] = -a[k];
  EXPECT_NEAR(mutual_information(a, neg, 16).nats, mutual_information(a, a, 16).nats, 1e-12);
}

TEST(MutualInformation, ConstantInputDegenerate) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> c(4, 7.0);
  const auto mi = mutual_information(a, c, 2);
  EXPECT_EQ(mi.nats, 0.0);
  EXPECT_TRUE(mi.degenerate);
}

TEST(EqualFrequencyBins, TiesShareBins) {
  const std::vector<double> v{5, 1, 1, 3, 2, 4, 6, 0};
  EXPECT_EQ(equal_frequency_bins(v, 4), (std::vector<int>{3, 0, 0, 2, 1, 2, 3, 0}));
}

TEST(RocAuc, PairwiseOracles) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.7, 0.1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.3}, std::vector<double>{0.7, 0.1}), 0.75);
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pos(static_cast<std::size_t>(5 + trial * 4)), neg(static_cast<std::size_t>(100 - trial * 3));
    for (auto& v : pos) v = level(gen) + 0.5;
    for (auto& v : neg) v = level(gen);
    EXPECT_EQ(roc_auc(pos, neg), brute_auc(pos, neg));
  }
}

TEST(RocCurve, EndsAtCorners) {
  const auto roc = roc_curve(std::vector<double>{0.9, 0.3}, std::vector<double>{0.7, 0.1});
  EXPECT_EQ(roc.front().fpr, 0.0);
  EXPECT_EQ(roc.front().tpr, 0.0);
  EXPECT_EQ(roc.back().fpr, 1.0);
  EXPECT_EQ(roc.back().tpr, 1.0);
}

TEST(Discriminability, IndistinguishableClasses) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n;
  FeatureSet real(500), synth(500);
  for (auto& f : real) f = {n(gen), n(gen), n(gen)};
  for (auto& f : synth) f = {n(gen), n(gen), n(gen)};
  DiscriminabilityOptions opts;
  opts.bootstrap_n = 300;
  const auto d = discriminability_auc(real, synth, RngKey(1), opts);
  EXPECT_GE(d.auc, 0.45);
  EXPECT_LE(d.auc, 0.55);
  EXPECT_LE(d.ci_low, 0.5);
  EXPECT_GE(d.ci_high, 0.5);
}

TEST(Discriminability, SeparatedClasses) {
  FeatureSet real, synth;
  for (int i = 0; i < 20; ++i) {
    real.push_back({10.0 + i});
    synth.push_back({-10.0 - i});
  }
  DiscriminabilityOptions opts;
  opts.bootstrap_n = 50;
  const auto d = discriminability_auc(real, synth, RngKey(2), opts);
  EXPECT_EQ(d.auc, 1.0);
  EXPECT_EQ(discriminability_auc(real, synth, RngKey(2), opts).bootstrap_aucs, d.bootstrap_aucs);
  FeatureSet few(real.begin(), real.begin() + 4);
  EXPECT_THROW((void)discriminability_auc(few, synth, RngKey(2), opts), InvalidArgument);
}

TEST(Glcm, ConstantAndCheckerboard) {
  const ImageGrid<float> flat(Shape{6, 6}, 0.4f);
  const auto s0 = glcm_stats(flat, 8, {0, 1});
  EXPECT_EQ(s0.contrast, 0.0);
  EXPECT_EQ(s0.homogeneity, 1.0);
  ImageGrid<float> board(Shape{8, 8});
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) board(i, j) = (i + j) % 2 ? 1.0f : 0.0f;
  }
  const auto s = glcm_stats(board, 2, {0, 1});
  EXPECT_EQ(s.contrast, 1.0);
  EXPECT_EQ(s.homogeneity, 0.5);
}

TEST(Glcm, MirrorSymmetric) {
  const auto x = random_grid<ImageGrid<float>>(Shape{8, 8}, 5, 0, 1);
  ImageGrid<float> mirror(x.shape());
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) mirror(i, j) = x(i, 7 - j);
  }
  const auto a = glcm_stats(x, 8, {0, 1});
  const auto b = glcm_stats(mirror, 8, {0, 1});
  EXPECT_EQ(a.contrast, b.contrast);
  EXPECT_EQ(a.homogeneity, b.homogeneity);
  const auto p = glcm_matrix(x, 8, {1, -1});
  double total = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      EXPECT_EQ(p[static_cast<std::size_t>(i * 8 + j)], p[static_cast<std::size_t>(j * 8 + i)]);
      total += p[static_cast<std::size_t>(i * 8 + j)];
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(Ecdf, NearestDistances) {
  const FeatureSet real{{0, 0}, {10, 0}};
  const FeatureSet synth{{1, 0}, {0, 2}, {12, 0}};
  const auto c = feature_distance_ecdf(real, synth);
  EXPECT_EQ(c.values, (std::vector<double>{1, 2}));
  EXPECT_EQ(c.fractions, (std::vector<double>{1.0 / 3, 1.0}));
  const auto copies = feature_distance_ecdf(real, real);
  EXPECT_EQ(copies.values, std::vector<double>{0});
  EXPECT_EQ(copies.fractions, std::vector<double>{1});
}

TEST(StatisticsEncoder, FixedLengthAndDeterministic) {
  const StatisticsEncoder enc;
  const auto x = random_grid<ImageGrid<float>>(Shape{12, 10}, 6, 0, 1);
  const auto f = enc.encode(x);
  ASSERT_EQ(f.size(), enc.dimension());
  EXPECT_EQ(f, enc.encode(x));
  const auto tiny = enc.encode(ImageGrid<float>(Shape{1, 1}, 0.5f));
  EXPECT_EQ(tiny.size(), 12u);
  for (double v : tiny) EXPECT_TRUE(std::isfinite(v));
}

TEST(LesionPatch, BoundingBoxWithMargin) {
  const auto x = random_grid<ImageGrid<float>>(Shape{16, 16}, 7, 0, 1);
  LesionMask m(x.shape());
  m.set(5, 6, true);
  m.set(7, 9, true);
  const auto p = lesion_patch(x, m, 2);
  EXPECT_EQ(p.shape(), (Shape{7, 8}));
  EXPECT_EQ(p(0, 0), x(3, 4));
  EXPECT_EQ(lesion_patch(x, LesionMask(x.shape()), 2), x);
  EXPECT_EQ(lesion_patch(x, m, 40), x);
}

TEST(Disentanglement, OrthogonalAndIdenticalFixtures) {
  const HalvesEncoder enc;
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<float> u(0.1f, 1.0f);
  std::vector<DisentanglementInput> orth, same;
  for (int i = 0; i < 64; ++i) {
    ImageGrid<float> left(Shape{4, 4}), right(Shape{4, 4});
    left(1, 1) = u(gen);
    right(2, 3) = u(gen);
    orth.push_back({left, right});
    ImageGrid<float> both(Shape{4, 4});
    both(0, 0) = u(gen);
    both(3, 3) = u(gen);
    same.push_back({both, both});
  }
  orth.push_back({ImageGrid<float>(Shape{4, 4}, 1.0f), ImageGrid<float>(Shape{4, 4})});
  const auto r0 = disentanglement_report(enc, orth, 16, RngKey(1), 20);
  EXPECT_EQ(r0.skipped, 1u);
  EXPECT_EQ(r0.coupling.n, 64u);
  EXPECT_EQ(r0.coupling.mean, 0.0);
  EXPECT_EQ(r0.coupling.sd, 0.0);
  const auto r1 = disentanglement_report(enc, same, 16, RngKey(1), 20);
  EXPECT_NEAR(r1.coupling.mean, 1.0, 1e-12);
  EXPECT_NEAR(r1.mutual_information.mean, std::log(16.0), 1e-9);
}
