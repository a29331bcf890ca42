#include "donorplan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "donorplan/errors.hpp"
#include "donorplan/solver_greedy.hpp"

namespace donorplan {

std::string_view to_string(SolverKind s) { return s == SolverKind::Exact ? "exact" : "greedy"; }

SolverKind parse_solver_kind(std::string_view text) {
  if (text == "exact") return SolverKind::Exact;
  if (text == "greedy") return SolverKind::Greedy;
  throw InvalidInput(fmt::format("unknown solver '{}' (expected exact or greedy)", text));
}

void WindowConfig::validate() const {
  if (window_months < 1 || window_months > 4) {
    throw InvalidInput(fmt::format("window length {} outside 1..4 months", window_months));
  }
  quantile.validate();
  if (radius_sweep.empty()) throw InvalidInput("radius sweep is empty");
  for (std::size_t k = 0; k < radius_sweep.size(); ++k) {
    if (!(radius_sweep[k] > 0.0)) throw InvalidInput("sweep radii must be positive");
    if (k > 0 && !(radius_sweep[k] > radius_sweep[k - 1])) {
      throw InvalidInput("radius sweep must be strictly increasing");
    }
  }
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw InvalidInput(fmt::format("coverage {} outside (0,1]", coverage));
  }
  if (provider != "historical_share" && provider != "constant" && provider != "none") {
    throw InvalidInput(fmt::format("unknown organic provider '{}'", provider));
  }
  if (!(provider_probability >= 0.0 && provider_probability <= 1.0)) {
    throw InvalidInput("provider probability outside [0,1]");
  }
  if (provider_lookback_years < 1) throw InvalidInput("provider lookback must be >= 1 year");
  forecaster_by_name(first_time_method);
  if (!(exclusion_threshold >= 0.0 && exclusion_threshold <= 1.0)) {
    throw InvalidInput("exclusion threshold outside [0,1]");
  }
}

void PipelineConfig::validate() const {
  window.validate();
  model.validate();
  eligibility.validate();
  if (!(limits.time_seconds > 0.0) || limits.max_nodes < 1 || limits.gap_tolerance < 0.0) {
    throw InvalidInput("invalid solver limits");
  }
}

bool ScenarioResult::all_feasible() const {
  return std::all_of(windows.begin(), windows.end(),
                     [](const WindowResult& w) { return w.solution.feasible; });
}

namespace {

class NoOrganicProvider final : public OrganicProvider {
 public:
  std::string name() const override { return "none"; }
  std::vector<DonorMonthProbability> predict(const Registry&,
                                             const std::vector<PlanningMonth>&) const override {
    return {};
  }
};

std::vector<PlanningMonth> window_months(PlanningMonth first, int months) {
  std::vector<PlanningMonth> out;
  for (int k = 0; k < months; ++k) out.push_back(first.plus(k));
  return out;
}

bool in_window(PlanningMonth m, PlanningMonth first, int months) {
  return first <= m && m < first.plus(months);
}

// Donation-equivalent history of one group, one value per recorded month.
MonthValues equivalent_history(const DemandPanel& panel, BloodGroup group) {
  MonthValues out;
  for (const auto& [key, units] : panel.observations()) {
    if (key.group != group || out.count(key.month)) continue;
    if (auto v = panel.equivalent(key.month, group)) out[key.month] = *v;
  }
  return out;
}

std::vector<double> first_time_forecast(const MonthlySeries& series, const std::string& method,
                                        PlanningMonth first, int months,
                                        std::vector<std::string>& notes) {
  const MonthlySeries history = series.before(first);
  if (history.empty()) {
    notes.push_back("no first-time history; first-time forecast is zero");
    return std::vector<double>(static_cast<std::size_t>(months), 0.0);
  }
  const int lead = history.end().months_until(first);
  auto tail = [&](std::vector<double> f) {
    return std::vector<double>(f.begin() + lead, f.begin() + lead + months);
  };
  try {
    return tail(forecaster_by_name(method).forecast(history, lead + months));
  } catch (const InsufficientData& e) {
    notes.push_back(fmt::format("first-time {} unavailable ({}); using same_month_mean", method,
                                e.what()));
  }
  try {
    return tail(same_month_mean(history, lead + months));
  } catch (const InsufficientData&) {
    notes.push_back("first-time forecast unavailable; using zero");
    return std::vector<double>(static_cast<std::size_t>(months), 0.0);
  }
}

// Sessions of the window with capacity reduced by `used` (clamped at 0).
std::vector<SessionWindow> window_sessions(const Registry& registry, PlanningMonth first,
                                           int months,
                                           const std::map<std::string, double>& used) {
  std::vector<SessionWindow> out;
  for (const auto& s : registry.sessions) {
    if (!in_window(s.month(), first, months)) continue;
    SessionWindow w = s;
    if (auto it = used.find(s.id); it != used.end()) {
      w.capacity = std::max(0.0, w.capacity - it->second);
    }
    out.push_back(std::move(w));
  }
  return out;
}

InvitationPlan run_solver(const FeasiblePairSet& pairs, const WindowProblem& problem,
                          SolverKind solver, const PipelineConfig& cfg,
                          const EligibilityConfig& eligibility, bool& feasible) {
  ResourceMeter meter;
  meter.start();
  InvitationPlan greedy =
      greedy_assign(pairs, problem.targets, problem.registry, cfg.model, eligibility);
  if (solver == SolverKind::Greedy) {
    greedy.resources = meter.stop();
    feasible = cfg.model.demand_mode == DemandMode::Soft || greedy.status == "feasible";
    return greedy;
  }

  const BilpModel model =
      build_model(pairs, problem.targets, problem.registry, cfg.model, eligibility);
  std::vector<double> warm;
  if (cfg.warm_start) warm = assignment_from_plan(model, pairs, greedy);
  const SolveResult res = solve_exact(model, cfg.limits, cfg.warm_start ? &warm : nullptr);
  InvitationPlan plan;
  if (res.has_solution()) {
    plan = plan_from_solution(model, pairs, problem.registry, res.values);
    plan.objective = plan_objective(plan, problem.registry, problem.targets, cfg.model);
  } else {
    plan.solver = "exact";
  }
  plan.status = std::string(to_string(res.status));
  plan.resources = meter.stop();
  feasible = res.has_solution();
  return plan;
}

}  // namespace

std::unique_ptr<OrganicProvider> make_provider(const WindowConfig& cfg) {
  if (cfg.provider == "constant") {
    return std::make_unique<ConstantProbabilityProvider>(cfg.provider_probability);
  }
  if (cfg.provider == "none") return std::make_unique<NoOrganicProvider>();
  return std::make_unique<HistoricalShareProvider>(cfg.provider_lookback_years);
}

WindowProblem prospective_problem(const Registry& state, const DemandPanel& panel,
                                  const MonthlySeries& first_time, const PipelineConfig& cfg,
                                  PlanningMonth first_month, int months) {
  const WindowConfig& wc = cfg.window;
  WindowProblem problem;
  problem.first_month = first_month;
  problem.months = months;
  const auto horizon = window_months(first_month, months);

  const auto provider = make_provider(wc);
  const auto ft = first_time_forecast(first_time, wc.first_time_method, first_month, months,
                                      problem.notes);
  const OrganicSupplyEstimate organic =
      organic_estimate(*provider, state, horizon, ft, first_time_donor_shares());
  problem.organic = organic.by_class;

  for (const auto& g : all_blood_groups()) {
    MonthValues history;
    bool history_loaded = false;
    for (const auto& m : horizon) {
      double target = 0.0;
      try {
        target = quantile_target(panel.same_month_history(m.month, g, m.year), m.year,
                                 wc.quantile);
      } catch (const InsufficientData&) {
        if (!history_loaded) {
          history = equivalent_history(panel, g);
          history_loaded = true;
        }
        target = carry_forward_target(history, m);
        problem.notes.push_back(
            fmt::format("{} {}: quantile history too short, carried forward", m.str(), g.name()));
      }
      const DemandClass cls{m, g};
      const auto it = organic.by_class.find(cls);
      const double supply = it == organic.by_class.end() ? 0.0 : it->second;
      DemandTarget t;
      if (wc.coverage_before_organic) {
        t.target = wc.coverage * target;
        t.residual = residual_demand(t.target, supply);
      } else {
        t.target = target;
        t.residual = wc.coverage * residual_demand(target, supply);
      }
      problem.targets[cls] = t;
    }
  }

  std::map<std::size_t, double> peak;
  for (const auto& dp : organic.donor_probabilities) {
    double& p = peak[dp.donor_index];
    p = std::max(p, dp.probability);
  }
  problem.registry.as_of = first_month.first_day();
  problem.registry.site_locations = state.site_locations;
  for (std::size_t i = 0; i < state.donors.size(); ++i) {
    auto it = peak.find(i);
    if (it != peak.end() && it->second >= wc.exclusion_threshold && it->second > 0.0) {
      problem.excluded_donors.push_back(state.donors[i].id);
      continue;
    }
    problem.registry.donors.push_back(state.donors[i]);
  }
  problem.registry.sessions = window_sessions(state, first_month, months, organic.by_session);
  return problem;
}

WindowSolution solve_window(const WindowProblem& problem, SolverKind solver,
                            const PipelineConfig& cfg) {
  WindowSolution sol;
  const auto& sweep = cfg.window.radius_sweep;
  const std::size_t attempts = cfg.model.demand_mode == DemandMode::Soft ? 1 : sweep.size();
  for (std::size_t k = 0; k < attempts; ++k) {
    EligibilityConfig elig = cfg.eligibility;
    elig.radius_km = sweep[k];
    const FeasiblePairSet pairs = build_feasible_pairs(problem.registry, elig);
    bool feasible = false;
    InvitationPlan plan = run_solver(pairs, problem, solver, cfg, elig, feasible);
    sol.trail.push_back({sweep[k], pairs.size(), plan.status, feasible});
    sol.plan = std::move(plan);
    if (feasible) {
      sol.feasible = true;
      sol.radius_km = sweep[k];
      break;
    }
  }
  sol.metrics = compute_metrics(sol.plan, problem.registry, problem.targets);
  return sol;
}

void apply_plan(Registry& state, const InvitationPlan& plan, bool bernoulli_attendance,
                std::uint64_t seed) {
  const RegistryIndex index(state);
  std::mt19937_64 rng(seed);
  std::set<std::size_t> touched;
  for (const auto& inv : plan.invitations) {
    const auto d = index.donor(inv.donor_id);
    const auto s = index.session(inv.session_id);
    if (!d || !s) {
      throw InvalidInput(fmt::format("plan row {}/{} not in registry", inv.donor_id,
                                     inv.session_id));
    }
    Donor& donor = state.donors[*d];
    donor.invitations_sent.push_back(inv.invited_on);
    bool attends = true;
    if (bernoulli_attendance) attends = std::bernoulli_distribution(inv.probability)(rng);
    if (attends) {
      const auto& session = state.sessions[*s];
      donor.donations.push_back({session.end_date, session.site_id});
    }
    touched.insert(*d);
  }
  for (std::size_t i : touched) {
    Donor& donor = state.donors[i];
    std::sort(donor.invitations_sent.begin(), donor.invitations_sent.end());
    std::sort(donor.donations.begin(), donor.donations.end(),
              [](const Donation& a, const Donation& b) { return a.date < b.date; });
  }
}

namespace {

WindowResult make_result(int index, WindowProblem&& problem, WindowSolution&& solution) {
  WindowResult r;
  r.index = index;
  r.first_month = problem.first_month;
  r.months = problem.months;
  r.targets = std::move(problem.targets);
  r.organic = std::move(problem.organic);
  r.excluded_donors = std::move(problem.excluded_donors);
  r.notes = std::move(problem.notes);
  r.solution = std::move(solution);
  return r;
}

PlanningMonth window_start(const Registry& state) {
  const PlanningMonth first = PlanningMonth::of(state.as_of);
  if (first.first_day() != state.as_of) {
    throw InvalidInput(fmt::format("window must start on the first day of a month, not {}",
                                   format_date(state.as_of)));
  }
  return first;
}

}  // namespace

WindowRun run_window(const Registry& state, const DemandPanel& panel,
                     const MonthlySeries& first_time, const PipelineConfig& cfg, int index) {
  cfg.validate();
  const PlanningMonth first = window_start(state);
  const int months = cfg.window.window_months;
  WindowProblem problem = prospective_problem(state, panel, first_time, cfg, first, months);
  WindowSolution solution = solve_window(problem, cfg.solver, cfg);

  WindowRun run;
  run.next_state = state;
  apply_plan(run.next_state, solution.plan, cfg.window.bernoulli_attendance,
             cfg.window.seed + static_cast<std::uint64_t>(index));
  run.next_state.as_of = first.plus(months).first_day();
  run.result = make_result(index, std::move(problem), std::move(solution));
  return run;
}

ScenarioResult run_horizon(const Registry& registry, const DemandPanel& panel,
                           const MonthlySeries& first_time, const PipelineConfig& cfg,
                           int n_windows) {
  if (n_windows < 1) throw InvalidInput("need at least one window");
  ScenarioResult out;
  Registry state = registry;
  for (int w = 0; w < n_windows; ++w) {
    WindowRun run = run_window(state, panel, first_time, cfg, w);
    out.windows.push_back(std::move(run.result));
    state = std::move(run.next_state);
  }
  out.final_state = std::move(state);
  return out;
}

std::vector<Violation> revalidate_scenario(const ScenarioResult& scenario,
                                           const Registry& original, const PipelineConfig& cfg) {
  InvitationPlan all;
  all.solver = "scenario";
  double radius = cfg.window.radius_sweep.front();
  for (const auto& w : scenario.windows) {
    const auto& inv = w.solution.plan.invitations;
    all.invitations.insert(all.invitations.end(), inv.begin(), inv.end());
    radius = std::max(radius, w.solution.radius_km.value_or(cfg.window.radius_sweep.back()));
  }
  all.sort();
  ValidationConfig vc;
  vc.eligibility = cfg.eligibility;
  vc.eligibility.radius_km = radius;
  vc.invite_cap = cfg.model.invite_cap_per_year;
  return validate_plan(all, original, {}, vc);
}

std::set<std::string> donors_without_donations(const Registry& registry, Date first, Date last) {
  std::set<std::string> out;
  for (const auto& d : registry.donors) {
    const bool any = std::any_of(d.donations.begin(), d.donations.end(), [&](const Donation& x) {
      return first <= x.date && x.date <= last;
    });
    if (!any) out.insert(d.id);
  }
  return out;
}

WindowProblem retrospective_problem(const Registry& observed, const Registry& state,
                                    const DemandPanel& panel, const std::set<std::string>& pool,
                                    const RetrospectiveConfig& retro, PlanningMonth first_month,
                                    int months) {
  if (!(retro.invited_probability > 0.0 && retro.invited_probability <= 1.0)) {
    throw InvalidInput("invited probability outside (0,1]");
  }
  if (!(retro.demand_scale >= 0.0)) throw InvalidInput("demand scale must be >= 0");
  WindowProblem problem;
  problem.first_month = first_month;
  problem.months = months;
  const Date first_day = first_month.first_day();
  const Date last_day = first_month.plus(months - 1).last_day();

  for (const auto& d : observed.donors) {
    for (const auto& x : d.donations) {
      if (x.date < first_day || x.date > last_day) continue;
      problem.organic[{PlanningMonth::of(x.date), d.blood_group}] += 1.0;
    }
  }
  for (const auto& m : window_months(first_month, months)) {
    for (const auto& g : all_blood_groups()) {
      const auto demand = panel.equivalent(m, g);
      if (!demand) {
        throw InsufficientData(fmt::format("no recorded demand for {} {}", m.str(), g.name()));
      }
      const DemandClass cls{m, g};
      DemandTarget t;
      t.target = *demand * retro.demand_scale;
      const auto it = problem.organic.find(cls);
      t.residual = residual_demand(t.target, it == problem.organic.end() ? 0.0 : it->second);
      problem.targets[cls] = t;
    }
  }

  std::map<std::string, double> used;
  for (const auto& s : observed.sessions) {
    if (!in_window(s.month(), first_month, months)) continue;
    for (const auto& d : observed.donors) {
      for (const auto& x : d.donations) {
        if (x.site_id == s.site_id && s.start_date <= x.date && x.date <= s.end_date) {
          used[s.id] += 1.0;
        }
      }
    }
  }

  problem.registry.as_of = first_day;
  problem.registry.site_locations = state.site_locations;
  for (const auto& d : state.donors) {
    if (!pool.count(d.id)) {
      problem.excluded_donors.push_back(d.id);
      continue;
    }
    Donor copy = d;
    copy.attendance_probability = retro.invited_probability;
    problem.registry.donors.push_back(std::move(copy));
  }
  problem.registry.sessions = window_sessions(state, first_month, months, used);
  return problem;
}

ScenarioResult retrospective_complement(const Registry& registry, const DemandPanel& panel,
                                        const PipelineConfig& cfg,
                                        const RetrospectiveConfig& retro, int n_windows,
                                        std::optional<PlanningMonth> first_month) {
  cfg.validate();
  if (n_windows < 1) throw InvalidInput("need at least one window");
  const int months = cfg.window.window_months;
  const PlanningMonth first =
      first_month ? *first_month : window_start(registry).plus(-months * n_windows);
  const Date horizon_last = first.plus(months * n_windows - 1).last_day();
  const auto pool = donors_without_donations(registry, first.first_day(), horizon_last);

  ScenarioResult out;
  Registry state = registry;
  for (int w = 0; w < n_windows; ++w) {
    const PlanningMonth start = first.plus(w * months);
    state.as_of = start.first_day();
    WindowProblem problem =
        retrospective_problem(registry, state, panel, pool, retro, start, months);
    WindowSolution solution = solve_window(problem, cfg.solver, cfg);
    apply_plan(state, solution.plan, cfg.window.bernoulli_attendance,
               cfg.window.seed + static_cast<std::uint64_t>(w));
    out.windows.push_back(make_result(w, std::move(problem), std::move(solution)));
  }
  state.as_of = std::max(registry.as_of, first.plus(months * n_windows).first_day());
  out.final_state = std::move(state);
  return out;
}

PlanMetrics scenario_metrics(const ScenarioResult& scenario, const Registry& original) {
  const RegistryIndex index(original);
  PlanMetrics m;
  double need = 0.0, met = 0.0, dist = 0.0;
  std::set<std::string> adverse;
  std::map<std::string, int> non_hf;
  for (const auto& w : scenario.windows) {
    const auto& plan = w.solution.plan;
    for (const auto& [cls, t] : w.targets) {
      if (t.residual <= 0.0) continue;
      need += t.residual;
      const auto it = plan.fulfilled.find(cls);
      met += std::min(it == plan.fulfilled.end() ? 0.0 : it->second, t.residual);
    }
    const Date start = w.first_month.first_day();
    for (const auto& inv : plan.invitations) {
      ++m.invitations;
      dist += inv.distance_km;
      const auto i = index.donor(inv.donor_id);
      if (!i) throw InvalidInput(fmt::format("plan names unknown donor {}", inv.donor_id));
      const Donor& donor = original.donors[*i];
      if (donor.adverse_reaction) adverse.insert(donor.id);
      if (!is_high_frequency(donor, start)) ++non_hf[donor.id];
    }
    m.runtime_s += plan.resources.wall_seconds;
    if (plan.resources.peak_memory_mb) {
      m.peak_memory_mb = std::max(m.peak_memory_mb.value_or(0.0), *plan.resources.peak_memory_mb);
    }
  }
  m.fulfillment_rate = need > 0.0 ? met / need : 1.0;
  m.adverse_invited = static_cast<int>(adverse.size());
  m.avg_distance_km = m.invitations > 0 ? dist / m.invitations : 0.0;
  int non_hf_total = 0;
  for (const auto& [id, n] : non_hf) non_hf_total += n;
  m.avg_invites_per_non_hf =
      non_hf.empty() ? 0.0 : static_cast<double>(non_hf_total) / static_cast<double>(non_hf.size());
  return m;
}

std::map<PlanningMonth, double> monthly_fulfillment(const ScenarioResult& scenario) {
  std::map<PlanningMonth, std::pair<double, double>> acc;  // covered, residual
  for (const auto& w : scenario.windows) {
    for (const auto& [cls, t] : w.targets) {
      auto& a = acc[cls.month];
      const auto it = w.solution.plan.fulfilled.find(cls);
      const double got = it == w.solution.plan.fulfilled.end() ? 0.0 : it->second;
      a.first += std::min(got, t.residual);
      a.second += t.residual;
    }
  }
  std::map<PlanningMonth, double> out;
  for (const auto& [m, a] : acc) out[m] = a.second > 0.0 ? a.first / a.second : 1.0;
  return out;
}

}  // namespace donorplan
