#include <gtest/gtest.h>

#include "donorplan/datagen.hpp"
#include "donorplan/errors.hpp"
#include "donorplan/pipeline.hpp"
#include "support/fixtures.hpp"

namespace donorplan {
namespace {

using std::chrono::days;

const GeneratedData& data() {
  static const GeneratedData d = [] {
    GenSpec spec;
    spec.n_donors = 1500;
    spec.n_sessions = 36;
    return generate(spec);
  }();
  return d;
}

PipelineConfig soft_config(SolverKind solver) {
  PipelineConfig cfg;
  cfg.solver = solver;
  cfg.model.demand_mode = DemandMode::Soft;
  cfg.limits.time_seconds = 5.0;
  return cfg;
}

TEST(ProspectiveProblem, ResidualsFollowTargetsAndOrganicSupply) {
  auto cfg = soft_config(SolverKind::Greedy);
  cfg.window.coverage = 0.9;
  const auto& d = data();
  const auto p = prospective_problem(d.registry, d.panel, d.first_time, cfg, {2020, 1}, 4);
  EXPECT_EQ(p.targets.size(), 4u * kBloodGroupCount);
  for (const auto& [cls, t] : p.targets) {
    const auto hist = d.panel.same_month_history(cls.month.month, cls.group, cls.month.year);
    EXPECT_DOUBLE_EQ(t.target, quantile_target(hist, cls.month.year, cfg.window.quantile));
    const auto it = p.organic.find(cls);
    const double supply = it == p.organic.end() ? 0.0 : it->second;
    const double gap = t.target - supply;
    EXPECT_DOUBLE_EQ(t.residual, 0.9 * (gap > 1e-9 ? gap : 0.0));
  }
  EXPECT_EQ(p.registry.as_of, make_date(2020, 1, 1));
  for (const auto& s : p.registry.sessions) {
    EXPECT_LT(s.month(), (PlanningMonth{2020, 5}));
    EXPECT_GE(s.capacity, 0.0);
  }
  EXPECT_EQ(p.registry.donors.size() + p.excluded_donors.size(), d.registry.donors.size());
}

TEST(ProspectiveProblem, CoverageBeforeOrganicScalesTheTarget) {
  auto cfg = soft_config(SolverKind::Greedy);
  cfg.window.coverage = 0.5;
  cfg.window.coverage_before_organic = true;
  const auto& d = data();
  const auto p = prospective_problem(d.registry, d.panel, d.first_time, cfg, {2020, 1}, 2);
  for (const auto& [cls, t] : p.targets) {
    const auto hist = d.panel.same_month_history(cls.month.month, cls.group, cls.month.year);
    EXPECT_DOUBLE_EQ(t.target, 0.5 * quantile_target(hist, cls.month.year, cfg.window.quantile));
    const auto it = p.organic.find(cls);
    EXPECT_DOUBLE_EQ(t.residual, residual_demand(t.target, it == p.organic.end() ? 0.0 : it->second));
  }
}

TEST(ProspectiveProblem, ExclusionThreshold) {
  auto cfg = soft_config(SolverKind::Greedy);
  cfg.window.provider = "constant";
  cfg.window.provider_probability = 0.6;
  const auto& d = data();
  const auto p = prospective_problem(d.registry, d.panel, d.first_time, cfg, {2020, 1}, 1);
  std::size_t active = 0;
  for (const auto& donor : d.registry.donors) {
    active += donor_status(donor, d.registry.as_of) == DonorStatus::Active;
  }
  EXPECT_EQ(p.excluded_donors.size(), active);
  cfg.window.provider_probability = 0.4;
  EXPECT_TRUE(prospective_problem(d.registry, d.panel, d.first_time, cfg, {2020, 1}, 1)
                  .excluded_donors.empty());
}

TEST(ProspectiveProblem, MissingFirstTimeHistoryMeansZero) {
  const auto& d = data();
  const auto p = prospective_problem(d.registry, d.panel, MonthlySeries{}, soft_config(SolverKind::Greedy),
                                     {2020, 1}, 1);
  EXPECT_FALSE(p.notes.empty());
}

TEST(RunHorizon, WindowsChainAndRevalidateClean) {
  const auto& d = data();
  for (SolverKind solver : {SolverKind::Greedy, SolverKind::Exact}) {
    const auto cfg = soft_config(solver);
    const auto sc = run_horizon(d.registry, d.panel, d.first_time, cfg, 3);
    ASSERT_EQ(sc.windows.size(), 3u);
    EXPECT_EQ(sc.windows[1].first_month, (PlanningMonth{2020, 5}));
    EXPECT_EQ(sc.final_state.as_of, make_date(2021, 1, 1));
    EXPECT_TRUE(revalidate_scenario(sc, d.registry, cfg).empty()) << to_string(solver);
    std::size_t invited = 0;
    for (const auto& w : sc.windows) invited += w.solution.plan.invitations.size();
    EXPECT_GT(invited, 0u);
  }
}

TEST(RunHorizon, SameInputsSameOutputs) {
  const auto& d = data();
  const auto cfg = soft_config(SolverKind::Greedy);
  const auto a = run_horizon(d.registry, d.panel, d.first_time, cfg, 2);
  const auto b = run_horizon(d.registry, d.panel, d.first_time, cfg, 2);
  EXPECT_EQ(a.final_state, b.final_state);
}

TEST(RunWindow, StartMustBeFirstOfMonth) {
  auto reg = data().registry;
  reg.as_of = make_date(2020, 1, 2);
  EXPECT_THROW(run_window(reg, data().panel, data().first_time, soft_config(SolverKind::Greedy)),
               InvalidInput);
}

TEST(ApplyPlan, RecordsInvitationsAndSimulatedDonations) {
  using testing::kLisbon;
  Registry reg;
  reg.as_of = make_date(2020, 1, 1);
  reg.donors.push_back(testing::make_donor("a", Sex::Male, make_date(1980, 1, 1), {}, 0.5, kLisbon));
  reg.sessions.push_back(testing::make_session("S", "site", kLisbon, make_date(2020, 2, 3),
                                               make_date(2020, 2, 6), 1.0));
  InvitationPlan plan;
  plan.invitations.push_back({"a", "S", make_date(2020, 2, 3), reg.as_of, 0.0, 0.5, false});
  auto state = reg;
  apply_plan(state, plan, false, 1);
  EXPECT_EQ(state.donors[0].invitations_sent, std::vector<Date>{reg.as_of});
  ASSERT_EQ(state.donors[0].donations.size(), 1u);
  EXPECT_EQ(state.donors[0].donations[0], (Donation{make_date(2020, 2, 6), "site"}));
  EXPECT_FALSE(state.donors[0].last_brigade_anchor.has_value());
  plan.invitations[0].donor_id = "zz";
  EXPECT_THROW(apply_plan(state, plan, false, 1), InvalidInput);
}

TEST(Retrospective, PoolAndTargets) {
  GenSpec spec;
  spec.n_donors = 1500;
  spec.n_sessions = 36;
  spec.observed_months = 12;
  const auto d = generate(spec);
  const auto cfg = soft_config(SolverKind::Greedy);
  const RetrospectiveConfig retro{.invited_probability = 0.05, .demand_scale = 2.0};
  const auto sc = retrospective_complement(d.registry, d.panel, cfg, retro, 3);
  ASSERT_EQ(sc.windows.size(), 3u);
  EXPECT_EQ(sc.windows[0].first_month, (PlanningMonth{2020, 1}));
  const auto pool = donors_without_donations(d.registry, make_date(2020, 1, 1), make_date(2020, 12, 31));
  for (const auto& w : sc.windows) {
    for (const auto& [cls, t] : w.targets) {
      EXPECT_DOUBLE_EQ(t.target, 2.0 * *d.panel.equivalent(cls.month, cls.group));
    }
    for (const auto& inv : w.solution.plan.invitations) {
      EXPECT_TRUE(pool.contains(inv.donor_id));
      EXPECT_EQ(inv.probability, 0.05);
    }
  }
  const auto m = scenario_metrics(sc, d.registry);
  EXPECT_GT(m.invitations, 0);
  EXPECT_GE(m.fulfillment_rate, 0.0);
  EXPECT_LE(m.fulfillment_rate, 1.0);
}

TEST(MonthlyFulfillment, HandComputed) {
  ScenarioResult sc;
  WindowResult w;
  const BloodGroup a(Abo::A, Rh::Positive), o(Abo::O, Rh::Positive);
  w.targets = {{{PlanningMonth{2020, 1}, a}, {4.0, 2.0}},
               {{PlanningMonth{2020, 1}, o}, {4.0, 2.0}},
               {{PlanningMonth{2020, 2}, a}, {0.0, 0.0}}};
  w.solution.plan.fulfilled = {{{PlanningMonth{2020, 1}, a}, 3.0}, {{PlanningMonth{2020, 1}, o}, 1.0}};
  sc.windows.push_back(w);
  const auto f = monthly_fulfillment(sc);
  EXPECT_DOUBLE_EQ(f.at({2020, 1}), 0.75);
  EXPECT_DOUBLE_EQ(f.at({2020, 2}), 1.0);
}

TEST(PipelineConfig, Validation) {
  PipelineConfig cfg;
  cfg.window.window_months = 5;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = PipelineConfig{};
  cfg.window.radius_sweep = {3.0, 3.0};
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = PipelineConfig{};
  cfg.window.provider = "oracle";
  EXPECT_THROW(cfg.validate(), InvalidInput);
  cfg = PipelineConfig{};
  cfg.window.coverage = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidInput);
  EXPECT_THROW(parse_solver_kind("simplex"), InvalidInput);
}

}  // namespace
}  // namespace donorplan
