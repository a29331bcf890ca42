#include <gtest/gtest.h>

#include <limits>

#include "donorplan/plan_eval.hpp"
#include "donorplan/solver_exact.hpp"
#include "donorplan/solver_greedy.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace donorplan {
namespace {

using testing::random_small_instance;
using testing::enumerate_optimum;
using testing::kNoSolution;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(SolveExact, ZeroDemandGivesEmptyOptimalPlan) {
  auto inst = random_small_instance(7);
  inst.model_cfg.demand_mode = DemandMode::Hard;
  for (auto& [cls, t] : inst.targets) t.residual = 0.0;
  const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                 inst.eligibility);
  const auto res = solve_exact(model);
  EXPECT_EQ(res.status, SolveStatus::Optimal);
  EXPECT_EQ(res.objective, 0.0);
  const auto plan = plan_from_solution(model, inst.pairs, inst.registry, res.values);
  EXPECT_TRUE(plan.invitations.empty());
}

TEST(SolveExact, PrefersTheCloserOfTwoDonors) {
  using testing::kLisbon;
  Registry reg;
  reg.as_of = make_date(2020, 1, 1);
  const BloodGroup g(Abo::O, Rh::Positive);
  reg.donors.push_back(testing::make_donor("near", Sex::Male, make_date(1980, 1, 1), g, 0.5,
                                           testing::offset_km(kLisbon, 1.0, 0.0)));
  reg.donors.push_back(testing::make_donor("far", Sex::Male, make_date(1980, 1, 1), g, 0.5,
                                           testing::offset_km(kLisbon, 2.0, 0.0)));
  reg.sessions.push_back(testing::make_session("S", "site", kLisbon, make_date(2020, 2, 3),
                                               make_date(2020, 2, 7), 0.5));
  EligibilityConfig elig;
  const auto pairs = build_feasible_pairs(reg, elig);
  ASSERT_EQ(pairs.size(), 2u);
  DemandTargets targets{{{PlanningMonth{2020, 2}, g}, {0.5, 0.5}}};
  const auto model = build_model(pairs, targets, reg, ModelConfig{}, elig);
  const auto res = solve_exact(model);
  ASSERT_EQ(res.status, SolveStatus::Optimal);
  const auto plan = plan_from_solution(model, pairs, reg, res.values);
  ASSERT_EQ(plan.invitations.size(), 1u);
  EXPECT_EQ(plan.invitations[0].donor_id, "near");
  EXPECT_NEAR(res.objective, 1.0, 1e-6);
}

TEST(SolveExact, MatchesExhaustiveEnumerationOnIntegerFixtures) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto inst = random_small_instance(seed, {.max_pairs = 12, .integer_distances = true});
    const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                   inst.eligibility);
    const double expected = enumerate_optimum(inst);
    const auto res = solve_exact(model);
    if (expected == kNoSolution) {
      EXPECT_EQ(res.status, SolveStatus::Infeasible) << "seed " << seed;
    } else {
      ASSERT_EQ(res.status, SolveStatus::Optimal) << "seed " << seed;
      EXPECT_EQ(res.objective, expected) << "seed " << seed;
    }
  }
}

TEST(SolveExact, MatchesExhaustiveEnumerationWithRealDistances) {
  for (std::uint64_t seed = 101; seed <= 160; ++seed) {
    auto inst = random_small_instance(seed, {.max_pairs = 16});
    const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                   inst.eligibility);
    const double expected = enumerate_optimum(inst);
    const auto res = solve_exact(model);
    if (expected == kNoSolution) {
      EXPECT_EQ(res.status, SolveStatus::Infeasible) << "seed " << seed;
    } else {
      ASSERT_EQ(res.status, SolveStatus::Optimal) << "seed " << seed;
      EXPECT_NEAR(res.objective, expected, 1e-6) << "seed " << seed;
    }
  }
}

LpProblem two_variable_lp() {
  // min -x - y  s.t.  x + 2y <= 4,  3x + y <= 6,  0 <= x, y <= 10.
  LpProblem lp;
  lp.rows = 2;
  lp.cols = 2;
  lp.columns = {{{0, 1.0}, {1, 3.0}}, {{0, 2.0}, {1, 1.0}}};
  lp.cost = {-1.0, -1.0};
  lp.lower = {0.0, 0.0};
  lp.upper = {10.0, 10.0};
  lp.row_lower = {-kInf, -kInf};
  lp.row_upper = {4.0, 6.0};
  return lp;
}

TEST(SolveLp, VertexOfASmallPolytope) {
  const auto res = solve_lp(two_variable_lp());
  ASSERT_EQ(res.status, LpStatus::Optimal);
  EXPECT_NEAR(res.x[0], 1.6, 1e-9);
  EXPECT_NEAR(res.x[1], 1.2, 1e-9);
  EXPECT_NEAR(res.objective, -2.8, 1e-9);
  EXPECT_NEAR(res.dual_bound, -2.8, 1e-9);
}

TEST(SolveLp, WarmStartFromOptimalBasisNeedsNoPivots) {
  const auto lp = two_variable_lp();
  const auto first = solve_lp(lp);
  const auto again = solve_lp(lp, &first.basis);
  ASSERT_EQ(again.status, LpStatus::Optimal);
  EXPECT_EQ(again.iterations, 0);
  EXPECT_NEAR(again.objective, first.objective, 1e-12);
}

TEST(SolveLp, DetectsInfeasibility) {
  auto lp = two_variable_lp();
  lp.row_lower[0] = 50.0;
  lp.row_upper[0] = kInf;
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Infeasible);
}

TEST(SolveExact, CliqueRelaxationKeepsTheIntegerOptimum) {
  for (std::uint64_t seed = 200; seed <= 240; ++seed) {
    auto inst = random_small_instance(seed, {.max_pairs = 14});
    const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                   inst.eligibility);
    const auto plain = LpProblem::from_model(model, false);
    const auto merged = LpProblem::from_model(model, true);
    const auto a = solve_lp(plain);
    const auto b = solve_lp(merged);
    if (a.status == LpStatus::Optimal && b.status == LpStatus::Optimal) {
      // Clique rows are at least as tight.
      EXPECT_GE(b.objective, a.objective - 1e-7) << "seed " << seed;
    }
  }
}

TEST(SolveExact, WarmStartDoesNotChangeTheOptimum) {
  for (std::uint64_t seed = 300; seed <= 340; ++seed) {
    auto inst = random_small_instance(seed, {.max_pairs = 14, .soft_mode = 1});
    const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                   inst.eligibility);
    const auto greedy = greedy_assign(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                      inst.eligibility);
    const auto warm = assignment_from_plan(model, inst.pairs, greedy);
    const auto cold = solve_exact(model);
    const auto hot = solve_exact(model, {}, &warm);
    ASSERT_EQ(cold.status, SolveStatus::Optimal);
    ASSERT_EQ(hot.status, SolveStatus::Optimal);
    EXPECT_NEAR(cold.objective, hot.objective, 1e-6) << "seed " << seed;
    EXPECT_NEAR(hot.objective, enumerate_optimum(inst), 1e-6) << "seed " << seed;
  }
}

TEST(SolveExact, NodeLimitIsReported) {
  auto inst = random_small_instance(12, {.max_pairs = 16, .soft_mode = 1});
  const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                 inst.eligibility);
  const auto res = solve_exact(model, {.max_nodes = 0});
  EXPECT_TRUE(res.status == SolveStatus::BoundLimit || res.status == SolveStatus::Optimal);
  EXPECT_EQ(to_string(SolveStatus::BoundLimit), "bound_limit");
}

}  // namespace
}  // namespace donorplan
