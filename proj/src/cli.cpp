#include "donorplan/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "donorplan/bilp_model.hpp"
#include "donorplan/datagen.hpp"
#include "donorplan/errors.hpp"
#include "donorplan/forecast.hpp"
#include "donorplan/io.hpp"
#include "donorplan/pipeline.hpp"
#include "donorplan/plan_eval.hpp"

namespace donorplan {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string data_dir;
  std::string out_dir = "out";
  std::string as_of;
  int windows = 3;

  PipelineConfig pipe;
  std::string demand_mode = "hard";
  std::string solver = "exact";
  int invite_cap = 0;  // 0 disables the cap
  bool no_prune = false;
  bool no_warm_start = false;

  bool retrospective = false;
  RetrospectiveConfig retro;
  std::string retro_start;  // YYYY-MM

  // Command-specific
  GenSpec gen;
  std::string gen_as_of = "2020-01-01";
  std::string plan_file;
  std::optional<double> radius;
  int months = 0;
  std::string series_file;
  int first_year = 0;
  int last_year = 0;
  std::vector<std::string> methods;
  std::string mps_file;
};

void add_scenario_options(CLI::App& app, Options& o) {
  app.add_option("--data", o.data_dir, "Dataset directory")->group("Scenario");
  app.add_option("--out", o.out_dir, "Output directory")->capture_default_str()->group("Scenario");
  app.add_option("--as-of", o.as_of, "Planning date (first day of a month), YYYY-MM-DD")
      ->group("Scenario");
  app.add_option("--windows", o.windows, "Number of planning windows")
      ->capture_default_str()
      ->check(CLI::PositiveNumber)
      ->group("Scenario");

  auto& w = o.pipe.window;
  app.add_option("--window-months", w.window_months, "Months per window (1-4)")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--alpha", w.quantile.alpha, "Demand quantile level")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--trend-significance", w.quantile.trend_significance,
                 "Slope p-value below which targets are detrended")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--min-history-years", w.quantile.min_history_years,
                 "Years of same-month history needed for a quantile target")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--radius-sweep", w.radius_sweep, "Increasing radii in km")
      ->capture_default_str()
      ->delimiter(',')
      ->group("Window");
  app.add_option("--coverage", w.coverage, "Share of residual demand to cover, in (0,1]")
      ->capture_default_str()
      ->group("Window");
  app.add_flag("--coverage-before-organic", w.coverage_before_organic,
               "Scale targets before subtracting organic supply")
      ->group("Window");
  app.add_option("--provider", w.provider, "historical_share | constant | none")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--provider-probability", w.provider_probability,
                 "Monthly probability for the constant provider")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--provider-lookback-years", w.provider_lookback_years,
                 "Years averaged by the historical provider")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--first-time-method", w.first_time_method, "First-time donor forecaster")
      ->capture_default_str()
      ->group("Window");
  app.add_option("--exclusion-threshold", w.exclusion_threshold,
                 "Organic probability at which a donor leaves the pool")
      ->capture_default_str()
      ->group("Window");
  app.add_flag("--bernoulli-attendance", w.bernoulli_attendance,
               "Realise planned invitations as Bernoulli(p) donations")
      ->group("Window");
  app.add_option("--seed", w.seed, "Seed for simulated attendance")
      ->capture_default_str()
      ->group("Window");

  auto& m = o.pipe.model;
  app.add_option("--w-dist", m.w_dist, "Distance weight")->capture_default_str()->group("Model");
  app.add_option("--w-inv", m.w_inv, "Multiple-invitation weight")
      ->capture_default_str()
      ->group("Model");
  app.add_option("--w-adv", m.w_adv, "Adverse-reaction weight")
      ->capture_default_str()
      ->group("Model");
  app.add_option("--w-dem", m.w_dem, "Unmet-demand weight (soft mode)")
      ->capture_default_str()
      ->group("Model");
  app.add_option("--demand-mode", o.demand_mode, "hard | soft")
      ->capture_default_str()
      ->check(CLI::IsMember({"hard", "soft"}))
      ->group("Model");
  app.add_option("--invite-cap", o.invite_cap, "Invitations per donor per year, 0 for none")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber)
      ->group("Model");
  app.add_flag("--no-prune", o.no_prune, "Keep rows that can never bind")->group("Model");
  app.add_option("--min-gap-days", o.pipe.eligibility.min_gap_days, "Days between donations")
      ->capture_default_str()
      ->group("Model");
  app.add_option("--min-age", o.pipe.eligibility.min_age, "Minimum donor age")
      ->capture_default_str()
      ->group("Model");

  app.add_option("--solver", o.solver, "exact | greedy")
      ->capture_default_str()
      ->check(CLI::IsMember({"exact", "greedy"}))
      ->group("Solver");
  app.add_option("--time-limit", o.pipe.limits.time_seconds, "Seconds per exact solve")
      ->capture_default_str()
      ->group("Solver");
  app.add_option("--max-nodes", o.pipe.limits.max_nodes, "Branch-and-bound node limit")
      ->capture_default_str()
      ->group("Solver");
  app.add_option("--gap-tolerance", o.pipe.limits.gap_tolerance, "Relative optimality gap")
      ->capture_default_str()
      ->group("Solver");
  app.add_flag("--no-warm-start", o.no_warm_start, "Do not seed the exact solver with greedy")
      ->group("Solver");

  app.add_flag("--retrospective", o.retrospective,
               "Fill unmet recorded demand around the observed donations")
      ->group("Retrospective");
  app.add_option("--invited-probability", o.retro.invited_probability,
                 "Attendance probability of invited donors")
      ->capture_default_str()
      ->group("Retrospective");
  app.add_option("--demand-scale", o.retro.demand_scale, "Multiplier on recorded demand")
      ->capture_default_str()
      ->group("Retrospective");
  app.add_option("--retro-start", o.retro_start,
                 "First month YYYY-MM (default: the windows ending at the as-of date)")
      ->group("Retrospective");
}

void add_gen_options(CLI::App& app, Options& o) {
  auto& g = o.gen;
  app.add_option("--donors", g.n_donors, "Donors")->capture_default_str();
  app.add_option("--sessions", g.n_sessions, "Session windows")->capture_default_str();
  app.add_option("--sites", g.n_sites, "Collection sites")->capture_default_str();
  app.add_option("--postal-codes", g.n_postal_codes, "Postal codes")->capture_default_str();
  app.add_option("--start", o.gen_as_of, "Horizon start, YYYY-MM-DD")->capture_default_str();
  app.add_option("--horizon-months", g.horizon_months, "Session horizon")->capture_default_str();
  app.add_option("--history-years", g.history_years, "Donation history depth")
      ->capture_default_str();
  app.add_option("--panel-years", g.panel_years, "Demand panel depth")->capture_default_str();
  app.add_option("--share-active", g.share_active, "Active donor share")->capture_default_str();
  app.add_option("--share-lapsing", g.share_lapsing, "Lapsing donor share")
      ->capture_default_str();
  app.add_option("--adverse-rate", g.adverse_rate, "Adverse-reaction rate")
      ->capture_default_str();
  app.add_option("--suspension-rate", g.suspension_rate, "Suspension rate")
      ->capture_default_str();
  app.add_option("--lat-min", g.box.lat_min)->capture_default_str();
  app.add_option("--lat-max", g.box.lat_max)->capture_default_str();
  app.add_option("--lon-min", g.box.lon_min)->capture_default_str();
  app.add_option("--lon-max", g.box.lon_max)->capture_default_str();
  app.add_option("--demand-per-thousand", g.demand_per_thousand,
                 "Monthly demand per 1,000 donors")
      ->capture_default_str();
  app.add_option("--demand-trend", g.demand_trend, "Relative demand change per year")
      ->capture_default_str();
  app.add_option("--demand-noise", g.demand_noise, "Relative demand noise")
      ->capture_default_str();
  app.add_option("--session-capacity", g.session_capacity, "Mean session capacity")
      ->capture_default_str();
  app.add_option("--first-time-per-thousand", g.first_time_per_thousand,
                 "Monthly first-time donors per 1,000 donors")
      ->capture_default_str();
  app.add_option("--observed-months", g.observed_months,
                 "Months of realised attendance after the start")
      ->capture_default_str();
  app.add_option("--observed-attendance", g.observed_attendance,
                 "Attendance multiplier for realised donations")
      ->capture_default_str();
  app.add_option("--gen-seed", g.seed, "Generator seed")->capture_default_str();
}

// Option values as the flat key = value text accepted by --config.
std::string scenario_ini(const Options& o) {
  const auto& w = o.pipe.window;
  const auto& m = o.pipe.model;
  std::string sweep;
  for (double r : w.radius_sweep) sweep += (sweep.empty() ? "" : ", ") + fmt::format("{}", r);
  std::string s;
  auto kv = [&](std::string_view key, const std::string& value) {
    s += fmt::format("{} = {}\n", key, value);
  };
  auto str = [](const std::string& v) { return fmt::format("\"{}\"", v); };
  auto boolean = [](bool b) { return std::string(b ? "true" : "false"); };
  kv("data", str(o.data_dir));
  kv("as-of", str(o.as_of));
  kv("windows", std::to_string(o.windows));
  kv("window-months", std::to_string(w.window_months));
  kv("alpha", fmt::format("{}", w.quantile.alpha));
  kv("trend-significance", fmt::format("{}", w.quantile.trend_significance));
  kv("min-history-years", std::to_string(w.quantile.min_history_years));
  kv("radius-sweep", "[" + sweep + "]");
  kv("coverage", fmt::format("{}", w.coverage));
  kv("coverage-before-organic", boolean(w.coverage_before_organic));
  kv("provider", str(w.provider));
  kv("provider-probability", fmt::format("{}", w.provider_probability));
  kv("provider-lookback-years", std::to_string(w.provider_lookback_years));
  kv("first-time-method", str(w.first_time_method));
  kv("exclusion-threshold", fmt::format("{}", w.exclusion_threshold));
  kv("bernoulli-attendance", boolean(w.bernoulli_attendance));
  kv("seed", std::to_string(w.seed));
  kv("w-dist", fmt::format("{}", m.w_dist));
  kv("w-inv", fmt::format("{}", m.w_inv));
  kv("w-adv", fmt::format("{}", m.w_adv));
  kv("w-dem", fmt::format("{}", m.w_dem));
  kv("demand-mode", str(o.demand_mode));
  kv("invite-cap", std::to_string(o.invite_cap));
  kv("min-gap-days", std::to_string(o.pipe.eligibility.min_gap_days));
  kv("min-age", std::to_string(o.pipe.eligibility.min_age));
  kv("solver", str(o.solver));
  kv("time-limit", fmt::format("{}", o.pipe.limits.time_seconds));
  kv("max-nodes", std::to_string(o.pipe.limits.max_nodes));
  kv("invited-probability", fmt::format("{}", o.retro.invited_probability));
  kv("demand-scale", fmt::format("{}", o.retro.demand_scale));
  return s;
}

// --- Command plumbing -----------------------------------------------------------

class Run {
 public:
  Run(std::string command, std::vector<std::string> args, std::ostream& out)
      : command_(std::move(command)), args_(std::move(args)), out_(out) {}

  std::ostream& out() { return out_; }

  void input_checksums(const std::map<std::string, std::string>& sums) {
    for (const auto& [k, v] : sums) inputs_[k] = v;
  }
  void input_file(const fs::path& path) { inputs_[path.filename().string()] = file_sha256(path); }

  void write(const fs::path& dir, const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    outputs_[name] = sha256_hex(content);
  }

  void note(std::string key, ordered_json value) { extra_[std::move(key)] = std::move(value); }

  void manifest(const fs::path& dir, const std::string& config_text, int status) {
    ordered_json j;
    j["tool"] = "donorplan";
    j["version"] = kToolVersion;
    j["command"] = command_;
    j["arguments"] = args_;
    j["config"] = config_text;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["exit_status"] = status;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::ostream& out_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  ordered_json extra_ = ordered_json::object();
};

struct UsageError : Error {
  using Error::Error;
};

void finish_config(Options& o) {
  o.pipe.model.demand_mode = parse_demand_mode(o.demand_mode);
  o.pipe.solver = parse_solver_kind(o.solver);
  o.pipe.model.invite_cap_per_year =
      o.invite_cap > 0 ? std::optional<int>(o.invite_cap) : std::nullopt;
  o.pipe.model.prune_redundant_rows = !o.no_prune;
  o.pipe.warm_start = !o.no_warm_start;
  o.pipe.eligibility.radius_km = o.pipe.window.radius_sweep.empty()
                                     ? o.pipe.eligibility.radius_km
                                     : o.pipe.window.radius_sweep.front();
  try {
    o.pipe.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

Date as_of_date(const Options& o) {
  if (o.as_of.empty()) throw UsageError("--as-of is required (or set as-of in the config file)");
  try {
    return parse_date(o.as_of);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

Ingested load(const Options& o, Run& run) {
  if (o.data_dir.empty()) throw UsageError("--data is required");
  Ingested in = ingest(o.data_dir, {as_of_date(o)});
  run.input_checksums(in.report.checksums);
  std::size_t accepted = 0;
  for (const auto& [file, c] : in.report.counts) accepted += c.accepted;
  fmt::print(run.out(), "ingested {} rows, rejected {}, warnings {}\n", accepted,
             in.report.total_rejected(), in.report.warnings.size());
  return in;
}

void write_ingestion(const IngestionReport& report, const fs::path& dir, Run& run) {
  std::string text = csv_line({"file", "line", "reason"});
  for (const auto& r : report.rejections) {
    text += csv_line({r.file, std::to_string(r.line), r.reason});
  }
  run.write(dir, "rejections.csv", text);
  ordered_json counts = ordered_json::object();
  for (const auto& [file, c] : report.counts) {
    counts[file] = {{"accepted", c.accepted}, {"rejected", c.rejected}};
  }
  run.note("ingestion", {{"counts", counts}, {"warnings", report.warnings}});
}

std::string optional_number(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::string trail_text(const std::vector<RadiusAttempt>& trail) {
  std::string s;
  for (const auto& a : trail) {
    if (!s.empty()) s += ';';
    s += fmt::format("{}:{}", a.radius_km, a.status);
  }
  return s;
}

std::vector<PlanRow> plan_rows(const ScenarioResult& scenario) {
  std::vector<PlanRow> rows;
  for (const auto& w : scenario.windows) {
    for (const auto& inv : w.solution.plan.invitations) rows.push_back({w.index, inv});
  }
  return rows;
}

// report.csv: one row per window and demand class.
std::string report_csv(const ScenarioResult& scenario) {
  std::string text = csv_line({"window", "month", "blood_group", "target", "organic", "residual",
                               "fulfilled", "radius_km", "status"});
  for (const auto& w : scenario.windows) {
    for (const auto& [cls, t] : w.targets) {
      const auto org = w.organic.find(cls);
      const auto got = w.solution.plan.fulfilled.find(cls);
      text += csv_line({std::to_string(w.index), cls.month.str(), cls.group.name(),
                        fmt::format("{}", t.target),
                        fmt::format("{}", org == w.organic.end() ? 0.0 : org->second),
                        fmt::format("{}", t.residual),
                        fmt::format("{}", got == w.solution.plan.fulfilled.end() ? 0.0 : got->second),
                        optional_number(w.solution.radius_km), w.solution.plan.status});
    }
  }
  return text;
}

// windows.csv: per-window outcome without timings.
std::string windows_csv(const ScenarioResult& scenario) {
  std::string text = csv_line({"window", "first_month", "months", "status", "feasible",
                               "radius_km", "radius_trail", "invitations", "fulfillment",
                               "avg_distance_km", "adverse_invited", "avg_invites_per_non_hf",
                               "excluded_donors", "notes"});
  for (const auto& w : scenario.windows) {
    const auto& m = w.solution.metrics;
    std::string notes;
    for (const auto& n : w.notes) notes += (notes.empty() ? "" : "; ") + n;
    text += csv_line({std::to_string(w.index), w.first_month.str(), std::to_string(w.months),
                      w.solution.plan.status, w.solution.feasible ? "1" : "0",
                      optional_number(w.solution.radius_km), trail_text(w.solution.trail),
                      std::to_string(m.invitations), fmt::format("{}", m.fulfillment_rate),
                      fmt::format("{}", m.avg_distance_km), std::to_string(m.adverse_invited),
                      fmt::format("{}", m.avg_invites_per_non_hf),
                      std::to_string(w.excluded_donors.size()), notes});
  }
  return text;
}

std::string resources_csv(const ScenarioResult& scenario) {
  std::string text = csv_line({"window", "solver", "wall_seconds", "peak_memory_mb"});
  for (const auto& w : scenario.windows) {
    const auto& p = w.solution.plan;
    text += csv_line({std::to_string(w.index), p.solver, fmt::format("{:.6f}", p.resources.wall_seconds),
                      optional_number(p.resources.peak_memory_mb)});
  }
  return text;
}

void write_scenario(const ScenarioResult& scenario, const fs::path& dir, Run& run,
                    const std::string& suffix = "") {
  run.write(dir, "plan" + suffix + ".csv", plan_csv(plan_rows(scenario)));
  run.write(dir, "report" + suffix + ".csv", report_csv(scenario));
  run.write(dir, "windows" + suffix + ".csv", windows_csv(scenario));
  run.write(dir, "resources" + suffix + ".csv", resources_csv(scenario));
}

bool hard_infeasible(const ScenarioResult& scenario, const Options& o) {
  return o.pipe.model.demand_mode == DemandMode::Hard && !scenario.all_feasible();
}

std::optional<PlanningMonth> retro_start(const Options& o) {
  if (o.retro_start.empty()) return std::nullopt;
  try {
    return PlanningMonth::of(parse_date(o.retro_start + "-01"));
  } catch (const InvalidInput&) {
    throw UsageError(fmt::format("--retro-start '{}' is not YYYY-MM", o.retro_start));
  }
}

void print_windows(const ScenarioResult& scenario, std::ostream& out) {
  for (const auto& w : scenario.windows) {
    fmt::print(out, "window {} {} +{}m: {} radius {} invitations {} fulfillment {:.4f}\n", w.index,
               w.first_month.str(), w.months, w.solution.plan.status,
               w.solution.radius_km ? fmt::format("{}", *w.solution.radius_km) : "-",
               w.solution.metrics.invitations, w.solution.metrics.fulfillment_rate);
  }
}

// True when the option was passed as an argument rather than read from --config.
bool on_command_line(const std::vector<std::string>& args, std::string_view name) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == name || a.starts_with(std::string(name) + "=");
  });
}

// --- Commands --------------------------------------------------------------------

int cmd_gen(Options& o, Run& run) {
  o.gen.as_of = parse_date(o.gen_as_of);
  const GeneratedData data = generate(o.gen);
  const fs::path dir = o.out_dir;
  for (const auto& name : write_dataset(data, dir)) run.input_file(dir / name);
  o.data_dir = dir.string();
  o.as_of = format_date(data.registry.as_of);
  run.write(dir, "scenario.ini", scenario_ini(o));
  fmt::print(run.out(), "wrote {} donors, {} sessions to {} (as-of {})\n",
             data.registry.donors.size(), data.registry.sessions.size(), dir.string(), o.as_of);
  return kExitOk;
}

int cmd_plan(Options& o, Run& run) {
  finish_config(o);
  const Ingested in = load(o, run);
  const fs::path dir = o.out_dir;
  write_ingestion(in.report, dir, run);
  ScenarioResult scenario;
  if (o.retrospective) {
    scenario = retrospective_complement(in.data.registry, in.data.panel, o.pipe, o.retro,
                                        o.windows, retro_start(o));
  } else {
    scenario = run_horizon(in.data.registry, in.data.panel, in.data.first_time, o.pipe, o.windows);
  }
  write_scenario(scenario, dir, run);
  print_windows(scenario, run.out());
  if (!o.retrospective) {
    const auto violations = revalidate_scenario(scenario, in.data.registry, o.pipe);
    run.note("revalidation_violations", violations.size());
    fmt::print(run.out(), "cross-window revalidation: {} violations\n", violations.size());
    for (const auto& v : violations) fmt::print(run.out(), "  {}\n", v.str());
    if (!violations.empty()) return kExitViolations;
  }
  return hard_infeasible(scenario, o) ? kExitInfeasible : kExitOk;
}

int cmd_solve(Options& o, Run& run) {
  finish_config(o);
  const Ingested in = load(o, run);
  const fs::path dir = o.out_dir;
  write_ingestion(in.report, dir, run);
  if (o.months > 0) o.pipe.window.window_months = o.months;
  finish_config(o);
  ScenarioResult scenario;
  WindowRun w = run_window(in.data.registry, in.data.panel, in.data.first_time, o.pipe, 0);
  scenario.windows.push_back(std::move(w.result));
  scenario.final_state = std::move(w.next_state);
  write_scenario(scenario, dir, run);
  print_windows(scenario, run.out());
  return hard_infeasible(scenario, o) ? kExitInfeasible : kExitOk;
}

MonthlySeries read_series(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string source = path.filename().string();
  const CsvTable table = parse_csv(text, source);
  require_header(table, dataset_header(files::kFirstTime), source);
  std::vector<std::pair<PlanningMonth, double>> rows;
  for (const auto& row : table.rows) {
    if (row.fields.size() != 3) throw ParseError(source, row.line, 1, "expected 3 fields");
    try {
      rows.emplace_back(PlanningMonth::make(std::stoi(row.fields[0]),
                                            static_cast<unsigned>(std::stoi(row.fields[1]))),
                        std::stod(row.fields[2]));
    } catch (const std::exception& e) {
      throw ParseError(source, row.line, 1, e.what());
    }
  }
  try {
    return MonthlySeries::from_rows(rows);
  } catch (const InvalidInput& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

int cmd_backtest(Options& o, Run& run) {
  fs::path path = o.series_file;
  if (path.empty()) {
    if (o.data_dir.empty()) throw UsageError("--series or --data is required");
    path = fs::path(o.data_dir) / files::kFirstTime;
  }
  run.input_file(path);
  const MonthlySeries series = read_series(path);
  if (series.empty()) throw InsufficientData("empty series");
  std::vector<Forecaster> methods;
  if (o.methods.empty()) {
    methods = standard_forecasters();
  } else {
    for (const auto& name : o.methods) {
      try {
        methods.push_back(forecaster_by_name(name));
      } catch (const InvalidInput& e) {
        throw UsageError(e.what());
      }
    }
  }
  const int last_full = series.end().plus(-1).year - (series.end().plus(-1).month == 12 ? 0 : 1);
  const int last = o.last_year ? o.last_year : last_full;
  const int first = o.first_year ? o.first_year : last - 2;
  const BacktestReport report = backtest_loyo(series, methods, first, last);

  std::string cells = csv_line({"method", "year", "months", "mae", "error"});
  for (const auto& c : report.cells) {
    cells += csv_line({c.method, std::to_string(c.year), std::to_string(c.months),
                       c.available() ? fmt::format("{}", c.mae()) : "", c.error.value_or("")});
  }
  std::string pooled = csv_line({"method", "months", "mae", "relative_mae"});
  for (const auto& p : report.pooled) {
    pooled += csv_line({p.method, std::to_string(p.months), fmt::format("{}", p.mae),
                        fmt::format("{}", p.relative_mae)});
    fmt::print(run.out(), "{:<20} months {:>3} MAE {:.4f} relative {:.4f}\n", p.method, p.months,
               p.mae, p.relative_mae);
  }
  const fs::path dir = o.out_dir;
  run.write(dir, "backtest.csv", cells);
  run.write(dir, "backtest_summary.csv", pooled);
  return kExitOk;
}

int cmd_compare(Options& o, Run& run, bool demand_mode_given, bool scale_given) {
  if (!demand_mode_given) o.demand_mode = "soft";
  if (!scale_given) o.retro.demand_scale = 2.0;
  finish_config(o);
  const Ingested in = load(o, run);
  const fs::path dir = o.out_dir;
  write_ingestion(in.report, dir, run);

  std::map<SolverKind, PlanMetrics> metrics;
  for (SolverKind kind : {SolverKind::Greedy, SolverKind::Exact}) {
    PipelineConfig cfg = o.pipe;
    cfg.solver = kind;
    const ScenarioResult scenario = retrospective_complement(
        in.data.registry, in.data.panel, cfg, o.retro, o.windows, retro_start(o));
    write_scenario(scenario, dir, run, "_" + std::string(to_string(kind)));
    metrics[kind] = scenario_metrics(scenario, in.data.registry);
  }
  const auto& g = metrics.at(SolverKind::Greedy);
  const auto& e = metrics.at(SolverKind::Exact);
  std::string text = csv_line({"metric", "greedy", "exact"});
  auto row = [&](std::string_view name, const std::string& gv, const std::string& ev) {
    text += csv_line({std::string(name), gv, ev});
    fmt::print(run.out(), "{:<24} {:>14} {:>14}\n", name, gv, ev);
  };
  fmt::print(run.out(), "{:<24} {:>14} {:>14}\n", "metric", "greedy", "exact");
  row("fulfillment", fmt::format("{:.6f}", g.fulfillment_rate), fmt::format("{:.6f}", e.fulfillment_rate));
  row("adverse_invited", std::to_string(g.adverse_invited), std::to_string(e.adverse_invited));
  row("avg_distance_km", fmt::format("{:.6f}", g.avg_distance_km), fmt::format("{:.6f}", e.avg_distance_km));
  row("avg_invites_per_non_hf", fmt::format("{:.6f}", g.avg_invites_per_non_hf),
      fmt::format("{:.6f}", e.avg_invites_per_non_hf));
  row("runtime_s", fmt::format("{:.6f}", g.runtime_s), fmt::format("{:.6f}", e.runtime_s));
  row("peak_memory_mb", optional_number(g.peak_memory_mb), optional_number(e.peak_memory_mb));
  row("invitations", std::to_string(g.invitations), std::to_string(e.invitations));
  run.write(dir, "compare.csv", text);
  return kExitOk;
}

int cmd_export_model(Options& o, Run& run) {
  finish_config(o);
  const Ingested in = load(o, run);
  const Registry& reg = in.data.registry;
  const PlanningMonth first = PlanningMonth::of(reg.as_of);
  if (first.first_day() != reg.as_of) throw UsageError("--as-of must be the first day of a month");
  const WindowProblem problem = prospective_problem(reg, in.data.panel, in.data.first_time, o.pipe,
                                                    first, o.pipe.window.window_months);
  EligibilityConfig elig = o.pipe.eligibility;
  elig.radius_km = o.radius.value_or(o.pipe.window.radius_sweep.front());
  const FeasiblePairSet pairs = build_feasible_pairs(problem.registry, elig);
  const BilpModel model = build_model(pairs, problem.targets, problem.registry, o.pipe.model, elig);
  const std::string text = export_mps(model);
  const fs::path target = o.mps_file.empty() ? fs::path(o.out_dir) / "model.mps" : fs::path(o.mps_file);
  write_file(target, text);
  run.note("model", {{"file", target.string()}, {"sha256", sha256_hex(text)},
                     {"variables", model.variables.size()}, {"rows", model.constraints.size()},
                     {"radius_km", elig.radius_km}});
  fmt::print(run.out(), "wrote {} ({} variables, {} rows, radius {} km)\n", target.string(),
             model.variables.size(), model.constraints.size(), elig.radius_km);
  return kExitOk;
}

int cmd_validate(Options& o, Run& run) {
  finish_config(o);
  if (o.plan_file.empty()) throw UsageError("--plan is required");
  const Ingested in = load(o, run);
  run.input_file(o.plan_file);
  const auto rows = parse_plan_csv(read_file(o.plan_file), fs::path(o.plan_file).filename().string());
  const InvitationPlan plan = plan_from_rows(rows);
  ValidationConfig cfg;
  cfg.eligibility = o.pipe.eligibility;
  cfg.eligibility.radius_km = o.radius.value_or(o.pipe.window.radius_sweep.back());
  cfg.invite_cap = o.pipe.model.invite_cap_per_year;
  const auto violations = validate_plan(plan, in.data.registry, {}, cfg);
  std::string text = csv_line({"family", "subject", "amount", "detail"});
  for (const auto& v : violations) {
    text += csv_line({std::string(to_string(v.family)), v.subject, fmt::format("{}", v.amount), v.detail});
    fmt::print(run.out(), "{}\n", v.str());
  }
  run.write(fs::path(o.out_dir), "violations.csv", text);
  fmt::print(run.out(), "{} invitations, {} violations\n", plan.invitations.size(), violations.size());
  return violations.empty() ? kExitOk : kExitViolations;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Donor invitation planning"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Scenario file of key = value lines");
  app.require_subcommand(1);
  app.fallthrough();
  add_scenario_options(app, o);

  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset and a scenario file");
  add_gen_options(*gen, o);
  auto* plan = app.add_subcommand("plan", "Plan all windows of the horizon");
  auto* solve = app.add_subcommand("solve", "Plan a single window at the as-of date");
  solve->add_option("--months", o.months, "Window length (default: --window-months)");
  auto* backtest = app.add_subcommand("backtest", "Leave-one-year-out forecast backtest");
  backtest->add_option("--series", o.series_file, "Monthly series CSV (year,month,count)");
  backtest->add_option("--first-year", o.first_year, "First evaluated year");
  backtest->add_option("--last-year", o.last_year, "Last evaluated year");
  backtest->add_option("--methods", o.methods, "Forecasters")->delimiter(',');
  auto* compare = app.add_subcommand("compare", "Run both solvers on the retrospective scenario");
  auto* export_model = app.add_subcommand("export-model", "Write the first window's model as MPS");
  export_model->add_option("--radius", o.radius, "Radius in km (default: first sweep radius)");
  export_model->add_option("--mps", o.mps_file, "Output file (default: <out>/model.mps)");
  auto* validate = app.add_subcommand("validate", "Check a saved plan against the registry");
  validate->add_option("--plan", o.plan_file, "plan.csv to check")->required();
  validate->add_option("--radius", o.radius, "Radius in km (default: last sweep radius)");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  Run run(command, std::vector<std::string>(args.begin() + (args.empty() ? 0 : 1), args.end()), out);
  int status = kExitError;
  try {
    if (chosen == gen) status = cmd_gen(o, run);
    if (chosen == plan) status = cmd_plan(o, run);
    if (chosen == solve) status = cmd_solve(o, run);
    if (chosen == backtest) status = cmd_backtest(o, run);
    if (chosen == compare) {
      status = cmd_compare(o, run, on_command_line(args, "--demand-mode"),
                           on_command_line(args, "--demand-scale"));
    }
    if (chosen == export_model) status = cmd_export_model(o, run);
    if (chosen == validate) status = cmd_validate(o, run);
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    status = kExitError;
  }
  try {
    run.manifest(fs::path(o.out_dir), app.config_to_str(true, false), status);
  } catch (const std::exception& e) {
    fmt::print(err, "error writing manifest: {}\n", e.what());
    if (status == kExitOk) status = kExitError;
  }
  return status;
}

}  // namespace donorplan
