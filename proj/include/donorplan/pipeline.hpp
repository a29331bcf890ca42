#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "donorplan/bilp_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/eligibility.hpp"
#include "donorplan/forecast.hpp"
#include "donorplan/organic.hpp"
#include "donorplan/plan.hpp"
#include "donorplan/plan_eval.hpp"
#include "donorplan/solver_exact.hpp"

namespace donorplan {

enum class SolverKind : std::uint8_t { Exact, Greedy };

std::string_view to_string(SolverKind s);
SolverKind parse_solver_kind(std::string_view text);

struct WindowConfig {
  int window_months = 4;
  QuantileConfig quantile;
  std::vector<double> radius_sweep{3.0, 4.0, 5.0, 6.0};
  double coverage = 1.0;  // rho
  // Apply rho to the targets before organic subtraction instead of to the
  // residuals after it.
  bool coverage_before_organic = false;
  std::string provider = "historical_share";  // historical_share | constant | none
  double provider_probability = 0.3;          // constant provider only
  int provider_lookback_years = 3;
  std::string first_time_method = "holt_winters";
  double exclusion_threshold = 0.5;
  // Realise planned invitations as Bernoulli(p) donations instead of treating
  // all of them as attended.
  bool bernoulli_attendance = false;
  std::uint64_t seed = 1;

  // Throws InvalidInput.
  void validate() const;
};

struct PipelineConfig {
  WindowConfig window;
  ModelConfig model;
  EligibilityConfig eligibility;  // radius_km is replaced by the sweep
  SolverKind solver = SolverKind::Exact;
  SolveLimits limits;
  bool warm_start = true;  // seed the exact solver with the greedy plan

  void validate() const;
};

std::unique_ptr<OrganicProvider> make_provider(const WindowConfig& cfg);

// Everything a solver needs for one window.
struct WindowProblem {
  PlanningMonth first_month;
  int months = 0;
  // Invitation pool and the window's sessions at residual capacity;
  // as_of is the first day of the window.
  Registry registry;
  DemandTargets targets;
  std::map<DemandClass, double> organic;  // expected organic donations per class
  std::vector<std::string> excluded_donors;
  std::vector<std::string> notes;
};

struct RadiusAttempt {
  double radius_km = 0.0;
  std::size_t pairs = 0;
  std::string status;
  bool feasible = false;
};

struct WindowSolution {
  InvitationPlan plan;
  std::vector<RadiusAttempt> trail;
  std::optional<double> radius_km;  // chosen radius; unset when no radius worked
  bool feasible = false;
  PlanMetrics metrics;
};

struct WindowResult {
  int index = 0;
  PlanningMonth first_month;
  int months = 0;
  DemandTargets targets;
  std::map<DemandClass, double> organic;
  std::vector<std::string> excluded_donors;
  std::vector<std::string> notes;
  WindowSolution solution;
};

struct ScenarioResult {
  std::vector<WindowResult> windows;
  Registry final_state;

  bool all_feasible() const;
};

// Prospective problem for the months [first_month, first_month + months):
// quantile targets (carry-forward when the history is too short), organic
// supply from the provider plus the first-time forecast, residual demand and
// residual session capacity, and the organic exclusion list.
WindowProblem prospective_problem(const Registry& state, const DemandPanel& panel,
                                  const MonthlySeries& first_time, const PipelineConfig& cfg,
                                  PlanningMonth first_month, int months);

// Solves with the configured solver. Hard mode walks the radius sweep and
// keeps the smallest radius that meets demand; soft mode uses the first
// radius only. When no radius is feasible the plan from the largest radius is
// returned with feasible = false.
WindowSolution solve_window(const WindowProblem& problem, SolverKind solver,
                            const PipelineConfig& cfg);

// Appends each invitation date and, per planned invitation, a simulated
// donation at the session's end date. With bernoulli_attendance a donation
// is kept with probability p. Anchors are left untouched.
void apply_plan(Registry& state, const InvitationPlan& plan, bool bernoulli_attendance,
                std::uint64_t seed);

struct WindowRun {
  WindowResult result;
  Registry next_state;  // as_of moved to the first day after the window
};

// One prospective window starting at state.as_of, which must be the first
// day of a month.
WindowRun run_window(const Registry& state, const DemandPanel& panel,
                     const MonthlySeries& first_time, const PipelineConfig& cfg, int index = 0);

// Sequential windows of cfg.window.window_months each. Infeasible windows are
// reported and the run continues.
ScenarioResult run_horizon(const Registry& registry, const DemandPanel& panel,
                           const MonthlySeries& first_time, const PipelineConfig& cfg,
                           int n_windows);

// All window plans concatenated, validated against the registry the scenario
// started from. The radius limit is the largest chosen radius.
std::vector<Violation> revalidate_scenario(const ScenarioResult& scenario,
                                           const Registry& original, const PipelineConfig& cfg);

struct RetrospectiveConfig {
  double invited_probability = 0.05;
  double demand_scale = 1.0;
};

// Donors without any donation in [first, last].
std::set<std::string> donors_without_donations(const Registry& registry, Date first, Date last);

// Ex-post problem: targets are the recorded donation-equivalent demand
// (scaled), organic supply is the donations recorded in `observed`, session
// capacity is reduced by the donations recorded at the session's site within
// its dates, and the pool is `pool` with every probability set to
// invited_probability. Histories come from `state`.
WindowProblem retrospective_problem(const Registry& observed, const Registry& state,
                                    const DemandPanel& panel, const std::set<std::string>& pool,
                                    const RetrospectiveConfig& retro, PlanningMonth first_month,
                                    int months);

// Retrospective complement over n_windows windows starting at first_month
// (default: the n_windows windows ending at registry.as_of): the observed
// donations stay fixed and invitations go to donors with no donation in the
// horizon.
ScenarioResult retrospective_complement(const Registry& registry, const DemandPanel& panel,
                                        const PipelineConfig& cfg,
                                        const RetrospectiveConfig& retro, int n_windows,
                                        std::optional<PlanningMonth> first_month = std::nullopt);

// Metrics over all windows: fulfillment against each window's residuals,
// distinct adverse donors, mean distance per invitation, invitations per
// invited non-high-frequency donor (status at each window start in
// `original`), summed runtime and the largest peak memory.
PlanMetrics scenario_metrics(const ScenarioResult& scenario, const Registry& original);

// Per month: sum over groups of min(fulfilled, residual) / sum of residuals
// (1.0 when nothing is left to cover).
std::map<PlanningMonth, double> monthly_fulfillment(const ScenarioResult& scenario);

}  // namespace donorplan
