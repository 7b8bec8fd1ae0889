#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "pvdiff/schedule.hpp"

namespace pvdiff {
namespace {

TEST(Schedule, SingleStep) {
  const auto s = make_linear_schedule(1, 0.5, 0.5);
  ASSERT_EQ(s.steps(), 1);
  EXPECT_EQ(s.betas(), std::vector<double>{0.5});
  EXPECT_EQ(s.alpha_bars(), std::vector<double>{0.5});
}

TEST(Schedule, TwoSteps) {
  const auto s = make_linear_schedule(2, 0.1, 0.2);
  EXPECT_DOUBLE_EQ(s.alpha(1), 0.9);
  EXPECT_DOUBLE_EQ(s.alpha(2), 0.8);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.9);
  EXPECT_DOUBLE_EQ(s.alpha_bar(2), 0.72);
  EXPECT_EQ(s.alpha_bar(1), s.alpha(1));
  EXPECT_EQ(s.alpha_bar(2), s.alpha_bar(1) * s.alpha(2));
}

TEST(Schedule, CoefficientsTwoSteps) {
  const auto s = make_linear_schedule(2, 0.1, 0.2);
  const auto k = s.coefficients_at(2);
  EXPECT_NEAR(k.sqrt_ab, 0.848528137423857, 1e-14);
  EXPECT_NEAR(k.posterior_sigma, 0.26726124191242434, 1e-14);
  EXPECT_EQ(s.coefficients_at(1).posterior_sigma, 0.0);
}

TEST(Schedule, DefaultProductMatchesOracle) {
  const auto s = make_linear_schedule(1000, 1e-4, 0.02);
  EXPECT_NEAR(s.alpha_bar(1000) / 4.0358297653756835e-05, 1.0, 1e-6);
}

TEST(Schedule, Invariants) {
  const auto s = make_linear_schedule(1000, 1e-4, 0.02);
  double product = 1.0;
  for (int t = 1; t <= s.steps(); ++t) {
    EXPECT_GT(s.beta(t), 0.0);
    EXPECT_LT(s.beta(t), 1.0);
    product *= s.alpha(t);
    EXPECT_NEAR(s.alpha_bar(t) / product, 1.0, 1e-12);
    const auto k = s.coefficients_at(t);
    EXPECT_NEAR(k.sqrt_ab * k.sqrt_ab + k.sqrt_1mab * k.sqrt_1mab, 1.0, 1e-12);
    if (t > 1) {
      EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
      EXPECT_LT(k.sqrt_ab, s.coefficients_at(t - 1).sqrt_ab);
      EXPECT_GT(k.sqrt_1mab, s.coefficients_at(t - 1).sqrt_1mab);
    }
  }
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(1000), 0.02);
}

TEST(Schedule, Pure) {
  const auto a = make_linear_schedule(50, 1e-4, 0.2);
  const auto b = make_linear_schedule(50, 1e-4, 0.2);
  for (int t = 1; t <= 50; ++t) {
    const auto x = a.coefficients_at(t), y = b.coefficients_at(t);
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0);
  }
}

TEST(Schedule, Rejects) {
  EXPECT_THROW(make_linear_schedule(0, 1e-4, 0.02), ConfigError);
  EXPECT_THROW(make_linear_schedule(10, 0.0, 0.02), ConfigError);
  EXPECT_THROW(make_linear_schedule(10, 0.1, 1.0), ConfigError);
  EXPECT_THROW(make_linear_schedule(10, 0.2, 0.1), ConfigError);
  const auto s = make_linear_schedule(10, 1e-4, 0.02);
  EXPECT_THROW(s.coefficients_at(0), ConfigError);
  EXPECT_THROW(s.coefficients_at(11), ConfigError);
}

}  // namespace
}  // namespace pvdiff
