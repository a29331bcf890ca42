#include <gtest/gtest.h>

#include <random>

#include "donorplan/demand.hpp"
#include "donorplan/errors.hpp"
#include "support/scenarios.hpp"

namespace donorplan {
namespace {

TEST(DonationEquivalent, PlateletPoolsDominate) { EXPECT_EQ(donation_equivalent(100.0, 30.0), 150.0); }

TEST(DonationEquivalent, GridAgainstDefinition) {
  const double ce[] = {0.0, 1.0, 5.0, 12.5, 50.0, 100.0, 149.0, 1000.0};
  const double cpp[] = {0.0, 0.2, 1.0, 2.5, 10.0, 29.8, 30.0, 200.0};
  int cases = 0;
  for (double a : ce) {
    for (double b : cpp) {
      const double five = b + b + b + b + b;
      EXPECT_EQ(donation_equivalent(a, b), a >= five ? a : five) << a << " " << b;
      ++cases;
    }
  }
  EXPECT_EQ(cases, 64);
  EXPECT_THROW(donation_equivalent(-1.0, 0.0), InvalidInput);
  EXPECT_THROW(donation_equivalent(0.0, -1.0), InvalidInput);
}

TEST(DemandPanel, EquivalentReadsMissingComponentAsZero) {
  DemandPanel p;
  const BloodGroup g(Abo::A, Rh::Positive);
  p.add({2020, 1}, g, Component::CE, 100.0);
  p.add({2020, 1}, g, Component::CPP, 30.0);
  p.add({2020, 2}, g, Component::CPP, 4.0);
  EXPECT_EQ(p.equivalent({2020, 1}, g), 150.0);
  EXPECT_EQ(p.equivalent({2020, 2}, g), 20.0);
  EXPECT_FALSE(p.equivalent({2020, 3}, g).has_value());
  EXPECT_THROW(p.add({2020, 1}, g, Component::CE, 1.0), InvalidInput);
  EXPECT_THROW(p.add({2020, 4}, g, Component::CE, -1.0), InvalidInput);
  EXPECT_EQ(p.scaled(2.0).equivalent({2020, 1}, g), 300.0);
}

TEST(DemandPanel, SameMonthHistoryStopsBeforeTheYear) {
  DemandPanel p;
  const BloodGroup g(Abo::O, Rh::Negative);
  for (int y = 2015; y <= 2020; ++y) p.add({y, 3}, g, Component::CE, y - 2000.0);
  const auto h = p.same_month_history(3, g, 2019);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h.front(), std::make_pair(2015, 15.0));
  EXPECT_EQ(h.back(), std::make_pair(2018, 18.0));
}

TEST(LinearTrend, MatchesClosedForm) {
  const std::vector<std::pair<int, double>> h{{2010, 3.0}, {2011, 5.0}, {2012, 4.0}, {2013, 8.0}};
  const auto fit = fit_linear_trend(h);
  // Centred years -1.5, -0.5, 0.5, 1.5: sxx = 5, sxy = 7.
  EXPECT_NEAR(fit.slope, 1.4, 1e-12);
  EXPECT_NEAR(fit.at(2014), 5.0 + 1.4 * 2.5, 1e-12);
  // Residuals 0.1, 0.7, -1.7, 0.9.
  const double ssr = 0.01 + 0.49 + 2.89 + 0.81;
  const double t = 1.4 / std::sqrt(ssr / 2.0 / 5.0);
  // Two-sided t-distribution with 2 dof: p = 1 - |t| / sqrt(t^2 + 2).
  EXPECT_NEAR(fit.p_value, 1.0 - t / std::sqrt(t * t + 2.0), 1e-12);
}

TEST(EmpiricalQuantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4.0, 1.0, 3.0, 2.0}, 0.8), 3.4);
  EXPECT_DOUBLE_EQ(empirical_quantile({7.0}, 0.9), 7.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), InsufficientData);
}

TEST(QuantileTarget, FlatHistoryUsesPlainQuantile) {
  const std::vector<std::pair<int, double>> h{{2015, 10.0}, {2016, 14.0}, {2017, 9.0},
                                              {2018, 13.0}, {2019, 10.0}};
  QuantileConfig cfg;
  cfg.alpha = 0.5;
  EXPECT_DOUBLE_EQ(quantile_target(h, 2020, cfg), 10.0);
}

TEST(QuantileTarget, SignificantTrendIsReAddedAtTheTargetYear) {
  std::vector<std::pair<int, double>> h;
  for (int y = 2010; y < 2020; ++y) h.emplace_back(y, 100.0 + 10.0 * (y - 2010) + (y % 2 ? 1.0 : -1.0));
  QuantileConfig cfg;
  cfg.alpha = 0.5;
  const auto fit = fit_linear_trend(h);
  ASSERT_LT(fit.p_value, 0.10);
  std::vector<double> res;
  for (const auto& [x, y] : h) res.push_back(y - fit.at(x));
  EXPECT_NEAR(quantile_target(h, 2020, cfg), empirical_quantile(res, 0.5) + fit.at(2020), 1e-9);
}

TEST(QuantileTarget, IgnoresTheTargetYearAndLater) {
  std::vector<std::pair<int, double>> h{{2016, 5.0}, {2017, 5.0}, {2018, 5.0}, {2019, 1e9}};
  EXPECT_DOUBLE_EQ(quantile_target(h, 2019, {}), 5.0);
  EXPECT_THROW(quantile_target(h, 2018, {}), InsufficientData);
}

TEST(QuantileTarget, ClampedAtZero) {
  std::vector<std::pair<int, double>> h;
  for (int y = 2010; y < 2020; ++y) h.emplace_back(y, std::max(0.0, 90.0 - 10.0 * (y - 2010)));
  EXPECT_EQ(quantile_target(h, 2025, {}), 0.0);
}

TEST(QuantileTarget, CoverageOnStationaryPanels) {
  for (double alpha : {0.5, 0.8, 0.9}) {
    const double cov = testing::quantile_coverage(alpha, 300, 17);
    EXPECT_NEAR(cov, alpha, 0.10) << alpha;
  }
}

TEST(CarryForward, PriorYearSameMonth) {
  MonthValues v{{{2019, 4}, 12.0}};
  EXPECT_EQ(carry_forward_target(v, {2020, 4}), 12.0);
  EXPECT_THROW(carry_forward_target(v, {2020, 5}), InsufficientData);
}

TEST(ResidualDemand, ClampsAndSuppressesNoise) {
  EXPECT_EQ(residual_demand(10.0, 4.0), 6.0);
  EXPECT_EQ(residual_demand(4.0, 10.0), 0.0);
  EXPECT_EQ(residual_demand(0.1 + 0.2, 0.3), 0.0);
}

}  // namespace
}  // namespace donorplan
