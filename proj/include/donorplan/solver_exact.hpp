#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "donorplan/bilp_model.hpp"
#include "donorplan/plan.hpp"

namespace donorplan {

// ---------------------------------------------------------------------------
// LP relaxation
// ---------------------------------------------------------------------------

// min c'x  s.t.  row_lower <= A x <= row_upper,  lower <= x <= upper.
struct LpProblem {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::pair<int, double>>> columns;  // per column: (row, coef)
  std::vector<double> cost;
  std::vector<double> lower, upper;          // per column
  std::vector<double> row_lower, row_upper;  // per row

  // With merge_conflict_cliques the pairwise gap rows of each donor are
  // replaced by a cover of their conflict graph with clique rows
  // (sum over the clique <= 1), which has the same integer points.
  static LpProblem from_model(const BilpModel& model, bool merge_conflict_cliques = false);
};

enum class LpStatus : std::uint8_t {
  Optimal,
  Infeasible,
  IterationLimit,
  DualInfeasible,
  TimeLimit,
};

using Deadline = std::chrono::steady_clock::time_point;

// Basis over columns then row slacks: basic variable per row, and for each
// nonbasic variable whether it sits at its upper bound.
struct LpBasis {
  std::vector<int> basic;
  std::vector<char> at_upper;
  bool empty() const { return basic.empty(); }
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;  // structural values
  double objective = 0.0;
  // Lagrangian bound from the final duals; -inf when it cannot be formed.
  double dual_bound = 0.0;
  LpBasis basis;
  long iterations = 0;
};

// Bounded dual simplex with product-form updates and a Harris ratio test. The
// basis is factorized through its structural block only (rows whose slack is
// nonbasic against the basic columns), with a sparse LU. Starts from `warm`
// when given, else from the slack basis. Requires finite upper bounds on
// columns with negative cost.
LpResult solve_lp(const LpProblem& lp, const LpBasis* warm = nullptr, long max_iterations = -1,
                  std::optional<Deadline> deadline = std::nullopt);

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

enum class SolveStatus : std::uint8_t { Optimal, Infeasible, BoundLimit, TimeLimit };

std::string_view to_string(SolveStatus s);

struct SolveLimits {
  double time_seconds = 600.0;
  long max_nodes = 1'000'000;
  double gap_tolerance = 1e-6;
  int restart_interval = 1000;  // best-bound restart every this many nodes
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> values;  // one per model variable; empty without an incumbent
  double objective = 0.0;
  double bound = 0.0;
  long nodes_explored = 0;
  long lp_iterations = 0;
  double wall_seconds = 0.0;

  bool has_solution() const { return !values.empty(); }
};

// Completes integral assignment values with the smallest multi-invite
// indicators and slacks the rows allow, then checks every row to 1e-9.
// nullopt when the assignment is infeasible.
std::optional<std::vector<double>> complete_assignment(const BilpModel& model,
                                                      std::vector<double> values);

// Depth-first branch and bound on the LP relaxation, branching on the most
// fractional assignment variable (ties: smallest name), then on fractional
// multi-invite indicators. `warm_start` (assignment values, e.g. from the
// greedy plan) seeds the incumbent when feasible. Single-threaded and
// deterministic.
SolveResult solve_exact(const BilpModel& model, const SolveLimits& limits = {},
                        const std::vector<double>* warm_start = nullptr);

// Assignment vector for the pairs named in a plan (1 for invited pairs).
std::vector<double> assignment_from_plan(const BilpModel& model, const FeasiblePairSet& pairs,
                                         const InvitationPlan& plan);

// Invitations for the assignment variables at 1.
InvitationPlan plan_from_solution(const BilpModel& model, const FeasiblePairSet& pairs,
                                  const Registry& registry, const std::vector<double>& values);

}  // namespace donorplan
