#include <gtest/gtest.h>

#include <cmath>

#include "pathosyn/diffusion.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::box_mask;
using pathosyn::testing::random_grid;

namespace {

NoiseSchedule two_step() { return NoiseSchedule({0.1, 0.2}); }

DeviationField<double> constant(double v) { return DeviationField<double>(Shape{1, 1}, v); }

const LesionMask kOn(Shape{1, 1}, true);
const std::optional<DeviationField<double>> kNoZ;

}  // namespace

TEST(Schedule, SingleStep) {
  const auto s = linear_schedule(1, 0.003, 0.02);
  ASSERT_EQ(s.steps(), 1);
  EXPECT_EQ(s.beta(1), 0.003);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 1 - 0.003);
}

TEST(Schedule, TwoStepProducts) {
  const auto s = two_step();
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.9);
  EXPECT_DOUBLE_EQ(s.alpha_bar(2), 0.72);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  EXPECT_THROW((void)s.alpha_bar(3), InvalidArgument);
}

TEST(Schedule, DefaultEndpoint) {
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  EXPECT_NEAR(s.alpha_bar(1000), prod, 1e-15);
  EXPECT_NEAR(s.alpha_bar(1000), 4.04e-5, 0.01e-5);
  EXPECT_EQ(s.beta(1), 1e-4);
  EXPECT_NEAR(s.beta(1000), 0.02, 1e-17);
}

TEST(Schedule, RejectsBadBetas) {
  EXPECT_THROW((void)linear_schedule(0, 1e-4, 0.02), InvalidArgument);
  EXPECT_THROW(NoiseSchedule({0.1, 1.0}), InvalidArgument);
  EXPECT_THROW(NoiseSchedule({0.2, 0.1}), InvalidArgument);
}

TEST(Schedule, PosteriorSigma) {
  const NoiseSchedule s({0.1, 0.2}, SigmaKind::posterior);
  EXPECT_NEAR(s.sigma(2), std::sqrt((1 - 0.9) / (1 - 0.72) * 0.2), 1e-15);
  EXPECT_NEAR(two_step().sigma(2), std::sqrt(0.2), 1e-15);
}

TEST(DdimGrid, StartsAtTAndDescends) {
  const auto ts = ddim_timesteps(1000, 50);
  ASSERT_EQ(ts.size(), 50u);
  EXPECT_EQ(ts.front(), 1000);
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_LT(ts[i], ts[i - 1]);
  EXPECT_GE(ts.back(), 1);
  EXPECT_EQ(ddim_timesteps(10, 10), (std::vector<int>{10, 9, 8, 7, 6, 5, 4, 3, 2, 1}));
  EXPECT_THROW((void)ddim_timesteps(10, 11), InvalidArgument);
}

TEST(ForwardSample, ScalarOracle) {
  // sqrt(0.72) + sqrt(0.28)
  EXPECT_NEAR(forward_sample(constant(1.0), 2, constant(1.0), two_step(), kOn)[0], 1.377678, 5e-7);
}

TEST(ForwardSample, DegenerateCases) {
  const auto sched = linear_schedule(100, 1e-4, 0.02);
  const LesionMask m = box_mask(6, 1, 4, 2, 5);
  const auto r0 = random_grid<DeviationField<double>>(Shape{6, 6}, 1);
  const auto eps = random_grid<DeviationField<double>>(Shape{6, 6}, 2);
  const auto noiseless = forward_sample(r0, 40, DeviationField<double>(r0.shape()), sched, m);
  const auto pure = forward_sample(DeviationField<double>(r0.shape()), 40, eps, sched, LesionMask(r0.shape(), true));
  for (std::size_t k = 0; k < r0.size(); ++k) {
    EXPECT_EQ(noiseless[k], m[k] ? std::sqrt(sched.alpha_bar(40)) * r0[k] : 0.0);
    EXPECT_EQ(pure[k], std::sqrt(1 - sched.alpha_bar(40)) * eps[k]);
  }
}

TEST(EstimateClean, ScalarOracle) {
  const DeviationField<float> r_t(Shape{1, 1}, 1.3777f);
  const DeviationField<float> eps(Shape{1, 1}, 1.0f);
  // (1.3777 - sqrt(0.28)) / sqrt(0.72), evaluated from the float input.
  const double oracle = (static_cast<double>(1.3777f) - std::sqrt(0.28)) / std::sqrt(0.72);
  EXPECT_NEAR(estimate_clean(r_t, eps, 2, two_step(), kOn)[0], oracle, 1e-6);
  EXPECT_NEAR(oracle, 1.000025, 5e-7);
}

TEST(EstimateClean, InvertsForwardSample) {
  const auto sched = linear_schedule(1000, 1e-4, 0.02);
  const LesionMask m = box_mask(8, 2, 6, 1, 7);
  const auto r0 = random_grid<DeviationField<double>>(Shape{8, 8}, 3);
  const auto eps = random_grid<DeviationField<double>>(Shape{8, 8}, 4, -3, 3);
  for (int t : {1, 10, 500, 1000}) {
    const auto back = estimate_clean(forward_sample(r0, t, eps, sched, m), eps, t, sched, m);
    for (std::size_t k = 0; k < r0.size(); ++k) EXPECT_NEAR(back[k], m[k] ? r0[k] : 0.0, 1e-12);
  }
  const auto no_eps = estimate_clean(r0, DeviationField<double>(r0.shape()), 10, sched, m);
  for (std::size_t k = 0; k < r0.size(); ++k) {
    EXPECT_EQ(no_eps[k], m[k] ? r0[k] / std::sqrt(sched.alpha_bar(10)) : 0.0);
  }
}

TEST(AncestralStep, ScalarOracle) {
  const auto out = ancestral_step(constant(1.3777), constant(1.0), 2, std::optional(constant(1.0)), two_step(), kOn);
  // (1.3777 - 0.2 / sqrt(0.28)) / sqrt(0.8) + sqrt(0.2)
  EXPECT_NEAR(out[0], 1.564952, 5e-7);
}

TEST(AncestralStep, ExactAtFirstStep) {
  const auto sched = linear_schedule(10, 1e-3, 0.02);
  const LesionMask m = box_mask(5, 1, 4, 1, 4);
  const auto r0 = apply_support(random_grid<DeviationField<double>>(Shape{5, 5}, 5), m);
  const auto eps = random_grid<DeviationField<double>>(Shape{5, 5}, 6);
  const auto r1 = forward_sample(r0, 1, eps, sched, m);
  const auto back = ancestral_step(r1, eps, 1, sched, m);
  for (std::size_t k = 0; k < r0.size(); ++k) EXPECT_NEAR(back[k], r0[k], 1e-15);
  const auto rescale = ancestral_step(r1, DeviationField<double>(r1.shape()), 3, sched, m);
  for (std::size_t k = 0; k < r0.size(); ++k) EXPECT_NEAR(rescale[k], r1[k] / std::sqrt(sched.alpha(3)), 1e-15);
  EXPECT_THROW((void)ancestral_step(r1, eps, 1, std::optional(eps), sched, m), InvalidArgument);
}

TEST(DdimStep, ScalarOracle) {
  // r_t built so that the clean estimate is exactly 1 with eps_hat = 1.
  const double r_t = std::sqrt(0.72) + std::sqrt(0.28);
  const auto out = ddim_step(constant(r_t), constant(1.0), 2, 1, two_step(), 0.0, kNoZ, kOn);
  // sqrt(0.9) + sqrt(0.1)
  EXPECT_NEAR(out[0], 1.264911, 5e-7);
}

TEST(DdimStep, DeterministicInversionToZero) {
  const auto sched = linear_schedule(50, 1e-4, 0.02);
  const LesionMask m = box_mask(6, 0, 3, 0, 6);
  const auto r0 = apply_support(random_grid<DeviationField<double>>(Shape{6, 6}, 7), m);
  const auto eps = random_grid<DeviationField<double>>(Shape{6, 6}, 8);
  const auto r_t = forward_sample(r0, 30, eps, sched, m);
  const auto a = ddim_step(r_t, eps, 30, 0, sched, 0.0, kNoZ, m);
  const auto b = ddim_step(r_t, eps, 30, 0, sched, 0.0, kNoZ, m);
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k < r0.size(); ++k) EXPECT_NEAR(a[k], r0[k], 1e-13);
  EXPECT_THROW((void)ddim_step(r_t, eps, 30, 30, sched, 0.0, kNoZ, m), InvalidArgument);
  EXPECT_THROW((void)ddim_step(r_t, eps, 30, 10, sched, 1.5, kNoZ, m), InvalidArgument);
}

TEST(Transitions, NeverLeaveTheMask) {
  const auto sched = linear_schedule(20, 1e-3, 0.05);
  const LesionMask m = box_mask(7, 2, 5, 1, 3);
  const auto dense = random_grid<DeviationField<float>>(Shape{7, 7}, 9, -4, 4);
  const auto z = random_grid<DeviationField<float>>(Shape{7, 7}, 10, -4, 4);
  EXPECT_EQ(max_abs_outside(forward_sample(dense, 5, z, sched, m), m), 0.0f);
  EXPECT_EQ(max_abs_outside(forward_step(dense, 5, z, sched, m), m), 0.0f);
  EXPECT_EQ(max_abs_outside(estimate_clean(dense, z, 5, sched, m), m), 0.0f);
  EXPECT_EQ(max_abs_outside(ancestral_step(dense, z, 5, std::optional(z), sched, m), m), 0.0f);
  EXPECT_EQ(max_abs_outside(ddim_step(dense, z, 5, 2, sched, 1.0, std::optional(z), m), m), 0.0f);
}
