#include "donorplan/solver_exact.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::BoundLimit:
      return "bound_limit";
    case SolveStatus::TimeLimit:
      return "time_limit";
  }
  return "?";
}

std::optional<std::vector<double>> complete_assignment(const BilpModel& model,
                                                      std::vector<double> values) {
  if (values.size() != model.variables.size()) {
    throw InvalidInput(fmt::format("assignment has {} values for {} variables", values.size(),
                                   model.variables.size()));
  }
  for (std::size_t k = 0; k < model.variables.size(); ++k) {
    if (model.variables[k].kind == VarKind::Assignment) {
      values[k] = values[k] > 0.5 ? 1.0 : 0.0;
    } else {
      values[k] = 0.0;
    }
  }
  for (const auto& row : model.constraints) {
    if (row.tag != RowTag::MultiInviteLink && row.tag != RowTag::DemandSoft) continue;
    double activity = 0.0;
    std::optional<std::size_t> aux;
    for (const auto& t : row.terms) {
      if (model.variables[t.var].kind == VarKind::Assignment) {
        activity += t.coef * values[t.var];
      } else {
        aux = t.var;
      }
    }
    if (!aux) continue;
    if (row.tag == RowTag::MultiInviteLink) {
      values[*aux] = activity > row.rhs ? 1.0 : 0.0;
    } else {
      values[*aux] = std::max(0.0, row.rhs - activity);
    }
  }
  if (!violated_rows(model, values, 1e-9).empty()) return std::nullopt;
  return values;
}

namespace {

struct BoundChange {
  int var;
  double lower;
  double upper;
};

struct Node {
  std::vector<BoundChange> changes;
  LpBasis basis;
  double bound = -std::numeric_limits<double>::infinity();
};

// Most fractional variable of the given kind; ties go to the smallest name.
std::optional<int> branching_variable(const BilpModel& model, const std::vector<double>& x,
                                      VarKind kind) {
  std::optional<int> best;
  double best_frac = 1e-6;
  for (std::size_t k = 0; k < model.variables.size(); ++k) {
    if (model.variables[k].kind != kind) continue;
    const double frac = std::min(x[k] - std::floor(x[k]), std::ceil(x[k]) - x[k]);
    if (frac <= 1e-6) continue;
    if (!best || frac > best_frac + 1e-12 ||
        (std::abs(frac - best_frac) <= 1e-12 &&
         model.variables[k].name < model.variables[static_cast<std::size_t>(*best)].name)) {
      best = static_cast<int>(k);
      best_frac = frac;
    }
  }
  return best;
}

// LP-guided rounding: fractional assignments are dropped, then re-added in
// decreasing LP value while every capacity, gap, annual-limit and invite-cap
// row still holds and the objective does not get worse (or a hard demand row
// still needs supply).
class RoundingHeuristic {
 public:
  explicit RoundingHeuristic(const BilpModel& model) : model_(model), rows_of_(model.variables.size()) {
    for (std::size_t r = 0; r < model.constraints.size(); ++r) {
      for (const auto& t : model.constraints[r].terms) rows_of_[t.var].emplace_back(r, t.coef);
    }
  }

  std::vector<double> round(const std::vector<double>& lp_x) const {
    const auto& vars = model_.variables;
    std::vector<double> x(vars.size(), 0.0);
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < model_.pair_count; ++k) {
      if (lp_x[k] >= 1.0 - 1e-6) {
        x[k] = 1.0;
      } else if (lp_x[k] > 1e-6) {
        order.emplace_back(-lp_x[k], k);
      }
    }
    std::sort(order.begin(), order.end());

    std::vector<double> activity(model_.constraints.size(), 0.0);
    for (std::size_t k = 0; k < model_.pair_count; ++k) {
      if (x[k] == 0.0) continue;
      for (const auto& [r, c] : rows_of_[k]) activity[r] += c;
    }
    for (const auto& [neg, k] : order) {
      bool ok = true;
      bool helps_hard_demand = false;
      double delta = model_.objective[k];
      for (const auto& [r, c] : rows_of_[k]) {
        const auto& row = model_.constraints[r];
        switch (row.tag) {
          case RowTag::DemandHard:
            if (activity[r] < row.rhs - 1e-9) helps_hard_demand = true;
            break;
          case RowTag::DemandSoft: {
            const double before = std::max(0.0, row.rhs - activity[r]);
            const double after = std::max(0.0, row.rhs - activity[r] - c);
            for (const auto& t : row.terms) {
              if (vars[t.var].kind == VarKind::Slack) delta -= model_.objective[t.var] * (before - after);
            }
            break;
          }
          case RowTag::MultiInviteLink:
            if (activity[r] <= row.rhs + 1e-9 && activity[r] + c > row.rhs + 1e-9) {
              for (const auto& t : row.terms) {
                if (vars[t.var].kind == VarKind::MultiInvite) delta += model_.objective[t.var];
              }
            }
            break;
          default:
            if (activity[r] + c > row.rhs + 1e-9) ok = false;
            break;
        }
        if (!ok) break;
      }
      if (!ok || !(delta < 0.0 || helps_hard_demand)) continue;
      x[k] = 1.0;
      for (const auto& [r, c] : rows_of_[k]) activity[r] += c;
    }
    return x;
  }

 private:
  const BilpModel& model_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_of_;
};

}  // namespace

SolveResult solve_exact(const BilpModel& model, const SolveLimits& limits,
                        const std::vector<double>* warm_start) {
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  SolveResult result;
  double incumbent = std::numeric_limits<double>::infinity();
  auto offer = [&](const std::vector<double>& values) {
    auto completed = complete_assignment(model, values);
    if (!completed) return;
    const double obj = evaluate_objective(model, *completed);
    if (obj < incumbent) {
      incumbent = obj;
      result.values = std::move(*completed);
      result.objective = obj;
    }
  };
  if (warm_start) offer(*warm_start);

  const RoundingHeuristic rounding(model);
  LpProblem lp = LpProblem::from_model(model, true);
  const Deadline deadline =
      started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(limits.time_seconds));
  const std::vector<double> root_lower = lp.lower;
  const std::vector<double> root_upper = lp.upper;

  std::vector<Node> open;
  open.push_back({});
  bool incomplete = false;
  bool stopped = false;
  SolveStatus limit_status = SolveStatus::BoundLimit;

  auto prune_level = [&] {
    return incumbent - limits.gap_tolerance * std::max(1.0, std::abs(incumbent));
  };

  while (!open.empty()) {
    if (elapsed() > limits.time_seconds) {
      stopped = true;
      limit_status = SolveStatus::TimeLimit;
      break;
    }
    if (result.nodes_explored >= limits.max_nodes) {
      stopped = true;
      limit_status = SolveStatus::BoundLimit;
      break;
    }
    if (limits.restart_interval > 0 && result.nodes_explored > 0 &&
        result.nodes_explored % limits.restart_interval == 0) {
      auto best = std::min_element(open.begin(), open.end(),
                                   [](const Node& a, const Node& b) { return a.bound < b.bound; });
      std::iter_swap(best, open.end() - 1);
    }

    Node node = std::move(open.back());
    open.pop_back();
    if (node.bound >= prune_level()) continue;
    ++result.nodes_explored;

    lp.lower = root_lower;
    lp.upper = root_upper;
    for (const auto& c : node.changes) {
      lp.lower[c.var] = c.lower;
      lp.upper[c.var] = c.upper;
    }
    LpResult lpr = solve_lp(lp, node.basis.empty() ? nullptr : &node.basis, -1, deadline);
    result.lp_iterations += lpr.iterations;
    if (lpr.status == LpStatus::IterationLimit || lpr.status == LpStatus::DualInfeasible) {
      lpr = solve_lp(lp, nullptr, -1, deadline);
      result.lp_iterations += lpr.iterations;
    }
    if (lpr.status == LpStatus::TimeLimit) {
      open.push_back(std::move(node));
      stopped = true;
      limit_status = SolveStatus::TimeLimit;
      break;
    }
    if (lpr.status == LpStatus::Infeasible) continue;
    if (lpr.status != LpStatus::Optimal) {
      incomplete = true;
      continue;
    }

    double bound = std::isfinite(lpr.dual_bound) ? std::min(lpr.dual_bound, lpr.objective)
                                                 : lpr.objective - 1e-9 * std::max(1.0, std::abs(lpr.objective));
    bound = std::max(bound, node.bound);
    if (bound >= prune_level()) continue;

    auto branch = branching_variable(model, lpr.x, VarKind::Assignment);
    if (branch) offer(rounding.round(lpr.x));
    if (branch && bound >= prune_level()) continue;
    if (!branch) {
      offer(lpr.x);
      branch = branching_variable(model, lpr.x, VarKind::MultiInvite);
      if (!branch || bound >= prune_level()) continue;
    }

    const int v = *branch;
    const double value = lpr.x[static_cast<std::size_t>(v)];
    Node down{node.changes, lpr.basis, bound};
    down.changes.push_back({v, lp.lower[v], std::floor(value)});
    Node up{std::move(node.changes), std::move(lpr.basis), bound};
    up.changes.push_back({v, std::ceil(value), lp.upper[v]});
    if (value - std::floor(value) >= 0.5) {
      open.push_back(std::move(down));
      open.push_back(std::move(up));
    } else {
      open.push_back(std::move(up));
      open.push_back(std::move(down));
    }
  }

  result.wall_seconds = elapsed();
  const bool have = result.has_solution();
  if (!stopped && !incomplete) {
    result.status = have ? SolveStatus::Optimal : SolveStatus::Infeasible;
    result.bound = have ? result.objective : std::numeric_limits<double>::infinity();
    return result;
  }
  result.status = stopped ? limit_status : SolveStatus::BoundLimit;
  double open_bound = have ? result.objective : std::numeric_limits<double>::infinity();
  for (const auto& n : open) open_bound = std::min(open_bound, n.bound);
  if (incomplete) open_bound = -std::numeric_limits<double>::infinity();
  result.bound = open_bound;
  return result;
}

std::vector<double> assignment_from_plan(const BilpModel& model, const FeasiblePairSet& pairs,
                                         const InvitationPlan& plan) {
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    index[{pairs.pairs[k].donor_id, pairs.pairs[k].session_id}] = k;
  }
  std::vector<double> values(model.variables.size(), 0.0);
  for (const auto& inv : plan.invitations) {
    auto it = index.find({inv.donor_id, inv.session_id});
    if (it == index.end()) {
      throw InvalidInput(
          fmt::format("plan pair {}/{} is not a feasible pair", inv.donor_id, inv.session_id));
    }
    values[it->second] = 1.0;
  }
  return values;
}

InvitationPlan plan_from_solution(const BilpModel& model, const FeasiblePairSet& pairs,
                                  const Registry& registry, const std::vector<double>& values) {
  InvitationPlan plan;
  plan.solver = "exact";
  for (std::size_t k = 0; k < model.pair_count; ++k) {
    if (values[k] <= 0.5) continue;
    const auto& p = pairs.pairs[k];
    const auto& session = registry.sessions[p.session_index];
    plan.invitations.push_back({p.donor_id, p.session_id, session.earliest_admissible(),
                                registry.as_of, p.distance_km, p.donor_probability, p.adverse});
    plan.fulfilled[p.demand_class()] += p.donor_probability;
  }
  for (std::size_t k = model.pair_count; k < model.variables.size(); ++k) {
    const auto& v = model.variables[k];
    if (v.kind == VarKind::Slack && values[k] > 0.0) plan.slack[v.demand_class] = values[k];
  }
  plan.sort();
  return plan;
}

}  // namespace donorplan
