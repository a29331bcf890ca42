// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
// Criteria may be selected by number on the command line (e.g. "1 4 6").

#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "donorplan/cli.hpp"
#include "donorplan/datagen.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/forecast.hpp"
#include "donorplan/geo.hpp"
#include "donorplan/io.hpp"
#include "donorplan/pipeline.hpp"
#include "donorplan/plan_eval.hpp"
#include "donorplan/solver_exact.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"
#include "support/reference_forecasts.hpp"
#include "support/scenarios.hpp"

namespace donorplan {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome exactness_oracle() {
  const auto start = Clock::now();
  int solved = 0, integer_cases = 0, mismatches = 0, infeasible = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; solved < 100; ++seed) {
    const bool integer = solved < 50;
    const auto inst = testing::random_small_instance(
        seed * 7919, {.max_pairs = 16, .integer_distances = integer});
    const auto model = build_model(inst.pairs, inst.targets, inst.registry, inst.model_cfg,
                                   inst.eligibility);
    const double expected = testing::enumerate_optimum(inst);
    const auto res = solve_exact(model);
    if (expected == testing::kNoSolution) {
      ++infeasible;
      mismatches += res.status != SolveStatus::Infeasible;
      continue;
    }
    ++solved;
    integer_cases += integer;
    if (res.status != SolveStatus::Optimal) {
      ++mismatches;
      continue;
    }
    const double diff = std::abs(res.objective - expected);
    worst = std::max(worst, diff);
    mismatches += integer ? res.objective != expected : diff > 1e-6;
  }
  const double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 60.0,
          fmt::format("{} instances with an optimum ({} integer) plus {} infeasible ones, {} mismatches, "
                      "max |diff| {:.2e}, {:.1f} s",
                      solved, integer_cases, infeasible, mismatches, worst, elapsed)};
}

Outcome validator_soundness() {
  int dirty = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto c = testing::greedy_case(seed);
    dirty += !validate_plan(c.plan, c.inst.registry, c.inst.targets, c.validation).empty();
  }
  int injected = 0, wrong = 0;
  std::set<ViolationFamily> covered;
  for (std::uint64_t seed = 1; injected < 500 && seed <= 5000; ++seed) {
    const auto base = testing::greedy_case(seed);
    const ViolationFamily f =
        testing::kInjectableFamilies[seed % std::size(testing::kInjectableFamilies)];
    const auto c = testing::inject(base, f, seed * 31);
    if (!c) continue;
    ++injected;
    covered.insert(f);
    std::set<ViolationFamily> got;
    for (const auto& v : validate_plan(c->plan, c->inst.registry, c->inst.targets, c->validation)) {
      got.insert(v.family);
    }
    wrong += got != std::set<ViolationFamily>{f};
  }
  return {dirty == 0 && injected == 500 && wrong == 0,
          fmt::format("1000 clean plans with {} flagged; {} injected plans over {} families, {} misreported",
                      dirty, injected, covered.size(), wrong)};
}

Outcome solver_comparison() {
  const auto data = generate(testing::comparison_spec());
  PlanMetrics m[2];
  double wall[2];
  const SolverKind kinds[2] = {SolverKind::Greedy, SolverKind::Exact};
  for (int k = 0; k < 2; ++k) {
    const auto start = Clock::now();
    const auto sc = retrospective_complement(data.registry, data.panel,
                                             testing::comparison_config(kinds[k]),
                                             testing::comparison_retro(), 3);
    wall[k] = seconds_since(start);
    m[k] = scenario_metrics(sc, data.registry);
  }
  const auto& g = m[0];
  const auto& e = m[1];
  const double gap_pp = 100.0 * (e.fulfillment_rate - g.fulfillment_rate);
  const bool pass = g.fulfillment_rate <= e.fulfillment_rate &&
                    g.avg_distance_km >= e.avg_distance_km && g.runtime_s <= e.runtime_s / 10.0 &&
                    gap_pp < 10.0;
  return {pass,
          fmt::format("fulfillment {:.4f} vs {:.4f} (gap {:.2f} pp), distance {:.3f} vs {:.3f} km, "
                      "solver time {:.2f} vs {:.2f} s (pipeline {:.1f} vs {:.1f} s), adverse {} vs {}, "
                      "invites/non-HF {:.3f} vs {:.3f}",
                      g.fulfillment_rate, e.fulfillment_rate, gap_pp, g.avg_distance_km,
                      e.avg_distance_km, g.runtime_s, e.runtime_s, wall[0], wall[1],
                      g.adverse_invited, e.adverse_invited, g.avg_invites_per_non_hf,
                      e.avg_invites_per_non_hf)};
}

Outcome demand_arithmetic() {
  const double ce[] = {0.0, 1.0, 5.0, 12.5, 50.0, 100.0, 149.0, 1000.0};
  const double cpp[] = {0.0, 0.2, 1.0, 2.5, 10.0, 29.8, 30.0, 200.0};
  int cases = 0, wrong = 0;
  for (double a : ce) {
    for (double b : cpp) {
      const double five = b + b + b + b + b;
      wrong += donation_equivalent(a, b) != (a >= five ? a : five);
      ++cases;
    }
  }
  const bool example = donation_equivalent(100.0, 30.0) == 150.0;
  return {cases == 64 && wrong == 0 && example,
          fmt::format("{} grid cases, {} wrong; 100 CE with 30 CPP gives {}", cases, wrong,
                      donation_equivalent(100.0, 30.0))};
}

Outcome temporal_rules() {
  const auto pairs = testing::feasible_pair_tally(10000, 2024);
  const auto rows = testing::temporal_rule_tally(10000, 99);
  const int total = pairs.discrepancies + rows.discrepancies;
  return {total == 0,
          fmt::format("pair generation: {} registries, {} discrepancies; gap/annual/cap rows: {} cases "
                      "({} / {} / {} broken), {} discrepancies",
                      pairs.registries, pairs.discrepancies, rows.cases, rows.gap_broken,
                      rows.annual_broken, rows.cap_broken, rows.discrepancies)};
}

Outcome haversine() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  double worst = 0.0;
  int asymmetric = 0, nonzero_identity = 0;
  for (int k = 0; k < 1000; ++k) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    const double expected = testing::chord_distance_km(a, b);
    worst = std::max(worst, std::abs(haversine_km(a, b) - expected) / expected);
    asymmetric += haversine_km(a, b) != haversine_km(b, a);
    nonzero_identity += haversine_km(a, a) != 0.0;
  }
  return {worst <= 1e-6 && asymmetric == 0 && nonzero_identity == 0,
          fmt::format("1000 pairs, max relative error {:.2e}, {} asymmetric, {} nonzero self-distances",
                      worst, asymmetric, nonzero_identity)};
}

Outcome forecast_oracles() {
  double worst = 0.0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const PlanningMonth start{2010, 1 + static_cast<unsigned>(seed % 12)};
    const int n = static_cast<int>(seed);
    const auto s = testing::synthetic_series(seed, 24 + 5 * n, start);
    const HoltWintersParams p{0.1 + 0.04 * seed, 0.05 * (seed % 7), 0.9 - 0.03 * seed};
    const auto ref = testing::reference_holt_winters(s.values(), 15, p.level, p.trend, p.seasonal);
    const auto hw = holt_winters_additive(s, 15, p);
    for (std::size_t h = 0; h < hw.size(); ++h) track(hw[h], ref.forecast[h]);
    track(holt_winters_in_sample_mae(s, p), ref.mae);

    const auto b = testing::synthetic_series(seed, 36 + n, start);
    const auto naive = seasonal_naive(b, 18);
    const auto mean3 = same_month_mean(b, 18, 3);
    const auto ref1 = testing::reference_same_month(b, 18, 1);
    const auto ref3 = testing::reference_same_month(b, 18, 3);
    for (int h = 0; h < 18; ++h) {
      track(naive[h], ref1[h]);
      track(mean3[h], ref3[h]);
    }

    const auto o = testing::synthetic_series(seed, 24 + 3 * n, start);
    const auto beta = testing::reference_ols(o);
    const auto fit = ols_trend_seasonal_fit(o);
    track(fit.intercept, static_cast<double>(beta[0]));
    track(fit.slope, static_cast<double>(beta[1]));
    for (int m = 2; m <= 12; ++m) track(fit.month_effect[m - 1], static_cast<double>(beta[m]));
  }

  const auto report = backtest_loyo(testing::toy_backtest_panel(), testing::toy_backtest_methods(),
                                    2018, 2019);
  const double cells[] = {90.0 / 12.0, 114.0 / 12.0, 56.0 / 12.0, 48.0 / 12.0, 1.0, 2.0};
  const double pooled[] = {204.0 / 24.0, 104.0 / 24.0, 36.0 / 24.0};
  int toy_wrong = report.cells.size() == 6 && report.pooled.size() == 3 ? 0 : 1;
  for (std::size_t k = 0; toy_wrong == 0 && k < 6; ++k) toy_wrong += report.cells[k].mae() != cells[k];
  for (std::size_t k = 0; toy_wrong == 0 && k < 3; ++k) toy_wrong += report.pooled[k].mae != pooled[k];

  const auto look = testing::look_ahead_check();
  const bool sentinel = look.changed_cells == 0 && look.unavailable_cells == 0 && look.spy_violations == 0;
  return {worst <= 1e-8 && toy_wrong == 0 && sentinel,
          fmt::format("max reference deviation {:.2e}; toy backtest {} wrong MAEs; sentinel {} changed cells, "
                      "{} spy sightings",
                      worst, toy_wrong, look.changed_cells, look.spy_violations)};
}

Outcome quantile_coverage() {
  std::string detail;
  bool pass = true;
  for (double alpha : {0.5, 0.8, 0.9}) {
    const double cov = testing::quantile_coverage(alpha, 300, 17);
    pass = pass && std::abs(cov - alpha) <= 0.10;
    detail += fmt::format("{}alpha {} -> {:.4f}", detail.empty() ? "" : ", ", alpha, cov);
  }
  return {pass, detail};
}

Outcome retrospective_deficit() {
  const auto data = generate(testing::deficit_spec());
  const auto start = Clock::now();
  const auto sc = retrospective_complement(data.registry, data.panel, testing::deficit_config(),
                                           testing::deficit_retro(), 3);
  const double elapsed = seconds_since(start);
  const auto monthly = monthly_fulfillment(sc);
  double lowest = 1.0;
  std::string months;
  for (const auto& [m, f] : monthly) {
    lowest = std::min(lowest, f);
    months += fmt::format(" {}:{:.3f}", m.str(), f);
  }
  return {monthly.size() == 12 && lowest >= 1.0 - 1e-9,
          fmt::format("{} months, lowest {:.4f}, {:.0f} s;{}", monthly.size(), lowest, elapsed, months)};
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("donorplan_acceptance_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "donorplan");
  std::ostringstream o, e;
  const int status = run_cli(args, o, e);
  if (out) *out = o.str() + e.str();
  return status;
}

Outcome determinism() {
  TempDir dir;
  const auto data = (dir / "data").string();
  if (cli({"gen", "--out", data, "--donors", "3000", "--sessions", "60", "--gen-seed", "11"}) != 0) {
    return {false, "gen failed"};
  }
  std::string text[2], log;
  int status[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = dir / ("run" + std::to_string(k));
    status[k] = cli({"plan", "--config", data + "/scenario.ini", "--out", out.string(), "--windows",
                     "3", "--window-months", "4", "--demand-mode", "soft", "--solver", "exact",
                     "--time-limit", "20", "--seed", "5"},
                    &log);
    text[k] = read_file(out / "plan.csv") + "\n" + read_file(out / "report.csv");
  }
  const bool identical = text[0] == text[1];
  const bool cli_clean = log.find("cross-window revalidation: 0 violations") != std::string::npos;

  GenSpec spec;
  spec.n_donors = 3000;
  spec.n_sessions = 60;
  spec.seed = 11;
  const auto gen = generate(spec);
  PipelineConfig cfg;
  cfg.solver = SolverKind::Greedy;
  cfg.model.demand_mode = DemandMode::Soft;
  const auto sc = run_horizon(gen.registry, gen.panel, gen.first_time, cfg, 3);
  const auto violations = revalidate_scenario(sc, gen.registry, cfg);
  std::size_t invitations = 0;
  for (const auto& w : sc.windows) invitations += w.solution.plan.invitations.size();
  return {status[0] == 0 && status[1] == 0 && identical && cli_clean && violations.empty(),
          fmt::format("plan exit {} / {}, plan+report byte-identical: {}, CLI revalidation clean: {}; "
                      "12-month 3-window greedy horizon: {} invitations, {} violations",
                      status[0], status[1], identical ? "yes" : "no", cli_clean ? "yes" : "no",
                      invitations, violations.size())};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace donorplan

int main(int argc, char** argv) {
  using namespace donorplan;
  const std::vector<Criterion> criteria{
      {1, "exactness oracle", exactness_oracle},
      {2, "validator soundness and completeness", validator_soundness},
      {3, "greedy versus exact at desk scale", solver_comparison},
      {4, "demand arithmetic", demand_arithmetic},
      {5, "temporal rules", temporal_rules},
      {6, "haversine", haversine},
      {7, "forecast oracles", forecast_oracles},
      {8, "quantile coverage", quantile_coverage},
      {9, "retrospective complement", retrospective_deficit},
      {10, "end-to-end determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.pass;
    fmt::print("{} criterion {:>2} {} ({:.1f} s): {}\n", o.pass ? "PASS" : "FAIL", c.number, c.name,
               seconds_since(start), o.detail);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
