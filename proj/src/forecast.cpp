#include "donorplan/forecast.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

MonthlySeries::MonthlySeries(PlanningMonth start, std::vector<double> values)
    : start_(start), values_(std::move(values)) {
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidInput(fmt::format("series value {} must be finite and >= 0", v));
    }
  }
}

MonthlySeries MonthlySeries::from_rows(
    const std::vector<std::pair<PlanningMonth, double>>& rows) {
  if (rows.empty()) return {};
  std::vector<double> values;
  values.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k > 0 && rows[k].first != rows[k - 1].first.plus(1)) {
      throw InvalidInput(fmt::format("series not contiguous at {} (previous {})",
                                     rows[k].first.str(), rows[k - 1].first.str()));
    }
    values.push_back(rows[k].second);
  }
  return MonthlySeries(rows.front().first, std::move(values));
}

std::optional<double> MonthlySeries::at(PlanningMonth m) const {
  const int k = start_.months_until(m);
  if (k < 0 || k >= static_cast<int>(values_.size())) return std::nullopt;
  return values_[static_cast<std::size_t>(k)];
}

MonthlySeries MonthlySeries::before(PlanningMonth origin) const {
  const int k = std::clamp(start_.months_until(origin), 0, static_cast<int>(values_.size()));
  return MonthlySeries(start_, std::vector<double>(values_.begin(), values_.begin() + k));
}

// --- Holt-Winters -------------------------------------------------------------

namespace {

struct HoltWintersState {
  double level = 0.0;
  double trend = 0.0;
  std::array<double, kSeasonLength> seasonal{};
};

void require_length(const MonthlySeries& series, std::size_t n, const char* method) {
  if (series.size() < n) {
    throw InsufficientData(fmt::format("{} needs at least {} months, got {}", method, n,
                                       series.size()));
  }
}

// Runs the recursion over the whole series; returns the sum of absolute
// one-step errors through `abs_error`.
HoltWintersState run_holt_winters(const std::vector<double>& y, const HoltWintersParams& p,
                                  double* abs_error) {
  const double m1 = std::accumulate(y.begin(), y.begin() + 12, 0.0) / 12.0;
  const double m2 = std::accumulate(y.begin() + 12, y.begin() + 24, 0.0) / 12.0;
  HoltWintersState st;
  st.trend = (m2 - m1) / 12.0;
  for (int i = 0; i < kSeasonLength; ++i) {
    st.seasonal[i] = y[i] - (m1 + (i - 5.5) * st.trend);
  }
  st.level = m1 + 5.5 * st.trend;

  double err = 0.0;
  for (std::size_t t = kSeasonLength; t < y.size(); ++t) {
    double& s = st.seasonal[t % kSeasonLength];
    err += std::abs(y[t] - (st.level + st.trend + s));
    const double level = p.level * (y[t] - s) + (1.0 - p.level) * (st.level + st.trend);
    st.trend = p.trend * (level - st.level) + (1.0 - p.trend) * st.trend;
    st.level = level;
    s = p.seasonal * (y[t] - level) + (1.0 - p.seasonal) * s;
  }
  if (abs_error) *abs_error = err;
  return st;
}

}  // namespace

std::vector<double> holt_winters_additive(const MonthlySeries& series, int horizon,
                                          const HoltWintersParams& params) {
  require_length(series, 24, "Holt-Winters");
  const auto st = run_holt_winters(series.values(), params, nullptr);
  const std::size_t last = series.size() - 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  for (int h = 1; h <= horizon; ++h) {
    out.push_back(st.level + h * st.trend + st.seasonal[(last + h) % kSeasonLength]);
  }
  return out;
}

double holt_winters_in_sample_mae(const MonthlySeries& series, const HoltWintersParams& params) {
  require_length(series, 24, "Holt-Winters");
  double err = 0.0;
  run_holt_winters(series.values(), params, &err);
  return err / static_cast<double>(series.size() - kSeasonLength);
}

HoltWintersParams fit_holt_winters(const MonthlySeries& series) {
  require_length(series, 24, "Holt-Winters");
  HoltWintersParams best;
  double best_mae = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= 9; ++a) {
    for (int b = 1; b <= 9; ++b) {
      for (int g = 1; g <= 9; ++g) {
        const HoltWintersParams p{a / 10.0, b / 10.0, g / 10.0};
        const double mae = holt_winters_in_sample_mae(series, p);
        if (mae < best_mae) {
          best_mae = mae;
          best = p;
        }
      }
    }
  }
  return best;
}

std::vector<double> holt_winters_forecast(const MonthlySeries& series, int horizon) {
  return holt_winters_additive(series, horizon, fit_holt_winters(series));
}

// --- Seasonal baselines ---------------------------------------------------------

std::vector<double> seasonal_naive(const MonthlySeries& series, int horizon) {
  return same_month_mean(series, horizon, 1);
}

std::vector<double> same_month_mean(const MonthlySeries& series, int horizon, int k_years) {
  if (k_years < 1) throw InvalidInput("k_years must be >= 1");
  require_length(series, static_cast<std::size_t>(12 * k_years), "same-month mean");
  const auto n = static_cast<long>(series.size());
  const auto& y = series.values();
  std::vector<double> out;
  for (int h = 1; h <= horizon; ++h) {
    long idx = n - 1 + h;
    while (idx >= n) idx -= kSeasonLength;
    if (idx - static_cast<long>(kSeasonLength) * (k_years - 1) < 0) {
      throw InsufficientData(fmt::format("fewer than {} same-month values for horizon {}",
                                         k_years, h));
    }
    double sum = 0.0;
    for (int k = 0; k < k_years; ++k) sum += y[static_cast<std::size_t>(idx - kSeasonLength * k)];
    out.push_back(sum / k_years);
  }
  return out;
}

// --- OLS trend + seasonal dummies -------------------------------------------------

double OlsFit::predict(const MonthlySeries& series, std::size_t k) const {
  const unsigned cal = series.month_at(k).month;
  return intercept + slope * static_cast<double>(k) + month_effect[cal - 1];
}

OlsFit ols_trend_seasonal_fit(const MonthlySeries& series) {
  require_length(series, 24, "OLS trend + seasonal");
  const auto n = static_cast<Eigen::Index>(series.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 13);
  Eigen::VectorXd y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    x(k, 0) = 1.0;
    x(k, 1) = static_cast<double>(k);
    const unsigned cal = series.month_at(static_cast<std::size_t>(k)).month;
    if (cal > 1) x(k, 1 + cal - 1) = 1.0;
    y(k) = series.values()[static_cast<std::size_t>(k)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < 13) throw DegenerateFit("trend + seasonal design is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);
  OlsFit fit;
  fit.intercept = beta(0);
  fit.slope = beta(1);
  fit.month_effect.assign(12, 0.0);
  for (int m = 2; m <= 12; ++m) fit.month_effect[m - 1] = beta(m);
  return fit;
}

std::vector<double> ols_trend_seasonal(const MonthlySeries& series, int horizon) {
  const OlsFit fit = ols_trend_seasonal_fit(series);
  std::vector<double> out;
  for (int h = 1; h <= horizon; ++h) out.push_back(fit.predict(series, series.size() - 1 + h));
  return out;
}

// --- Backtest -----------------------------------------------------------------------

std::vector<Forecaster> standard_forecasters() {
  return {
      {"holt_winters", [](const MonthlySeries& s, int h) { return holt_winters_forecast(s, h); }},
      {"same_month_mean", [](const MonthlySeries& s, int h) { return same_month_mean(s, h, 3); }},
      {"seasonal_naive", [](const MonthlySeries& s, int h) { return seasonal_naive(s, h); }},
      {"ols_trend_seasonal",
       [](const MonthlySeries& s, int h) { return ols_trend_seasonal(s, h); }},
  };
}

Forecaster forecaster_by_name(const std::string& name) {
  for (auto& f : standard_forecasters()) {
    if (f.name == name) return f;
  }
  throw InvalidInput(fmt::format("unknown forecasting method '{}'", name));
}

BacktestReport backtest_loyo(const MonthlySeries& series, const std::vector<Forecaster>& methods,
                             int first_year, int last_year) {
  BacktestReport report;
  for (const auto& method : methods) {
    BacktestSummary pooled{.method = method.name};
    double abs_sum = 0.0, actual_sum = 0.0;
    for (int year = first_year; year <= last_year; ++year) {
      BacktestCell cell{.method = method.name, .year = year, .error = std::nullopt};
      const PlanningMonth origin{year, 1};
      try {
        const auto forecasts = method.forecast(series.before(origin), 12);
        if (forecasts.size() != 12) throw InvalidInput("method returned wrong horizon");
        for (int h = 0; h < 12; ++h) {
          if (auto actual = series.at(origin.plus(h))) {
            cell.abs_error_sum += std::abs(forecasts[h] - *actual);
            cell.actual_sum += *actual;
            ++cell.months;
          }
        }
      } catch (const Error& e) {
        cell = BacktestCell{.method = method.name, .year = year, .error = e.what()};
      }
      if (cell.available()) {
        abs_sum += cell.abs_error_sum;
        actual_sum += cell.actual_sum;
        pooled.months += cell.months;
      }
      report.cells.push_back(std::move(cell));
    }
    if (pooled.months > 0) {
      pooled.mae = abs_sum / pooled.months;
      const double mean_actual = actual_sum / pooled.months;
      pooled.relative_mae = mean_actual > 0.0 ? pooled.mae / mean_actual : 0.0;
    }
    report.pooled.push_back(pooled);
  }
  return report;
}

// --- Blood-group allocation ----------------------------------------------------------

GroupValues first_time_donor_shares() {
  GroupValues s{};
  s[BloodGroup(Abo::A, Rh::Positive).index()] = 0.379;
  s[BloodGroup(Abo::O, Rh::Positive).index()] = 0.350;
  s[BloodGroup(Abo::B, Rh::Positive).index()] = 0.079;
  s[BloodGroup(Abo::O, Rh::Negative).index()] = 0.075;
  s[BloodGroup(Abo::A, Rh::Negative).index()] = 0.062;
  s[BloodGroup(Abo::AB, Rh::Positive).index()] = 0.036;
  s[BloodGroup(Abo::B, Rh::Negative).index()] = 0.014;
  s[BloodGroup(Abo::AB, Rh::Negative).index()] = 0.005;
  return s;
}

GroupValues allocate_by_blood_shares(double total, const GroupValues& shares) {
  double sum = 0.0;
  for (double s : shares) {
    if (!(s >= 0.0)) throw InvalidInput(fmt::format("negative blood-group share {}", s));
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput(fmt::format("blood-group shares sum to {}, not 1", sum));
  }
  GroupValues out{};
  for (int g = 0; g < kBloodGroupCount; ++g) out[g] = total * shares[g];
  return out;
}

}  // namespace donorplan
