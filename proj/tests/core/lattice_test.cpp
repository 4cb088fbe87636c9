#include <gtest/gtest.h>

#include <cmath>

#include "pathosyn/lattice.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::box_mask;
using pathosyn::testing::random_grid;

TEST(Complement, FlipsEverySite) {
  EXPECT_TRUE(complement(LesionMask(Shape{3, 4}, false)).full());
  EXPECT_TRUE(complement(LesionMask(Shape{3, 4}, true)).empty());
  const LesionMask diag(Shape{2, 2}, std::vector<std::uint8_t>{1, 0, 0, 1});
  EXPECT_EQ(complement(diag), LesionMask(Shape{2, 2}, std::vector<std::uint8_t>{0, 1, 1, 0}));
  EXPECT_EQ(complement(complement(diag)), diag);
}

TEST(SmoothMask, ConstantMasksStayConstant) {
  const auto ones = smooth_mask<double>(LesionMask(Shape{12, 12}, true), 2.0);
  const auto zeros = smooth_mask<double>(LesionMask(Shape{12, 12}, false), 2.0);
  for (std::size_t k = 0; k < ones.size(); ++k) {
    EXPECT_EQ(ones[k], 1.0);
    EXPECT_EQ(zeros[k], 0.0);
  }
}

TEST(SmoothMask, SinglePixelGivesCentralKernelWeight) {
  LesionMask m(Shape{9, 9});
  m.set(4, 4, true);
  double total = 0.0;
  for (int di = -3; di <= 3; ++di) {
    for (int dj = -3; dj <= 3; ++dj) {
      if (di * di + dj * dj <= 9) total += std::exp(-(di * di + dj * dj) / 2.0);
    }
  }
  const auto s = smooth_mask<double>(m, 1.0);
  EXPECT_NEAR(s(4, 4), 1.0 / total, 1e-15);
  EXPECT_NEAR(s(4, 5), std::exp(-0.5) / total, 1e-15);
  EXPECT_EQ(s(0, 0), 0.0);
}

TEST(SmoothMask, RangeAndExactZeroFarAway) {
  const LesionMask m = box_mask(32, 10, 16, 12, 20);
  const auto s = smooth_mask<float>(m, 2.0);
  for (int i = 0; i < 32; ++i) {
    for (int j = 0; j < 32; ++j) {
      EXPECT_GE(s(i, j), 0.0f);
      EXPECT_LE(s(i, j), 1.0f);
      const int di = std::max({10 - i, i - 15, 0});
      const int dj = std::max({12 - j, j - 19, 0});
      if (di * di + dj * dj > 36) EXPECT_EQ(s(i, j), 0.0f);
    }
  }
  EXPECT_THROW((void)smooth_mask<float>(m, 0.0), InvalidArgument);
}

TEST(RingWeight, PeaksAtHalf) {
  BlendMap<double> s(Shape{1, 4}, std::vector<double>{0.0, 0.25, 0.5, 1.0});
  const auto w = ring_weight(s);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_DOUBLE_EQ(w[1], 0.75);
  EXPECT_EQ(w[2], 1.0);
  EXPECT_EQ(w[3], 0.0);
}

TEST(ApplySupport, ElementwiseProduct) {
  const ImageGrid<float> f(Shape{2, 2}, std::vector<float>{2, 3, 4, 5});
  const LesionMask m(Shape{2, 2}, std::vector<std::uint8_t>{1, 0, 0, 1});
  EXPECT_EQ(apply_support(f, m), ImageGrid<float>(Shape{2, 2}, std::vector<float>{2, 0, 0, 5}));
  EXPECT_EQ(apply_support(f, LesionMask(Shape{2, 2}, true)), f);
  EXPECT_EQ(apply_support(f, LesionMask(Shape{2, 2}, false)), ImageGrid<float>(Shape{2, 2}));
  EXPECT_THROW((void)apply_support(f, LesionMask(Shape{3, 2}, true)), ShapeMismatch);
}

TEST(Saturate, TanhValues) {
  EXPECT_EQ(saturate_value(0.0, 0.5), 0.0);
  EXPECT_NEAR(saturate_value(1.0, 0.5), 0.482014, 5e-7);
  EXPECT_NEAR(saturate_value(-1.0, 0.5), -0.482014, 5e-7);
  EXPECT_LT(saturate_value(1e6f, 1.0f), 1.0f);
  EXPECT_GT(saturate_value(-1e6f, 1.0f), -1.0f);
  const auto r = random_grid<DeviationField<double>>(Shape{8, 8}, 3, -50, 50);
  const auto sat = saturate(r, 0.7);
  for (double v : sat.values()) EXPECT_LT(std::abs(v), 0.7);
  EXPECT_THROW((void)saturate(r, 0.0), InvalidArgument);
}

TEST(Recompose, AddsBlendedDeviation) {
  const ImageGrid<double> x_sub(Shape{1, 1}, 0.4);
  const DeviationField<double> r(Shape{1, 1}, 0.2);
  const BlendMap<double> s(Shape{1, 1}, 0.5);
  EXPECT_DOUBLE_EQ(recompose(x_sub, r, s)[0], 0.5);
}

TEST(Recompose, ZeroBlendIsBitExact) {
  const auto x_sub = random_grid<ImageGrid<float>>(Shape{6, 6}, 1, 0, 1);
  const auto r = random_grid<DeviationField<float>>(Shape{6, 6}, 2);
  const auto out = recompose(x_sub, r, BlendMap<float>(Shape{6, 6}));
  EXPECT_EQ(out, x_sub);
  EXPECT_EQ(recompose(x_sub, DeviationField<float>(Shape{6, 6}), smooth_mask<float>(box_mask(6, 2, 4, 2, 4))), x_sub);
}

TEST(MaxAbsOutside, MeasuresLeakage) {
  const LesionMask m = box_mask(4, 1, 3, 1, 3);
  DeviationField<double> r(Shape{4, 4});
  r(1, 1) = 5.0;
  EXPECT_EQ(max_abs_outside(r, m), 0.0);
  r(0, 3) = -0.25;
  EXPECT_EQ(max_abs_outside(r, m), 0.25);
}
