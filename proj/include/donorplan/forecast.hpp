#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "donorplan/core_model.hpp"

namespace donorplan {

// Contiguous monthly series starting at `start`. Gaps cannot be represented;
// from_rows() rejects them.
class MonthlySeries {
 public:
  MonthlySeries() = default;
  MonthlySeries(PlanningMonth start, std::vector<double> values);

  // Rows must be strictly increasing and gap-free; values >= 0.
  // Throws InvalidInput.
  static MonthlySeries from_rows(const std::vector<std::pair<PlanningMonth, double>>& rows);

  PlanningMonth start() const { return start_; }
  PlanningMonth month_at(std::size_t k) const { return start_.plus(static_cast<int>(k)); }
  // One past the last month.
  PlanningMonth end() const { return month_at(values_.size()); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::vector<double>& values() const { return values_; }
  std::optional<double> at(PlanningMonth m) const;

  // The prefix of months strictly before `origin`.
  MonthlySeries before(PlanningMonth origin) const;

  friend bool operator==(const MonthlySeries&, const MonthlySeries&) = default;

 private:
  PlanningMonth start_;
  std::vector<double> values_;
};

inline constexpr int kSeasonLength = 12;

struct HoltWintersParams {
  double level = 0.3;     // alpha
  double trend = 0.1;     // beta
  double seasonal = 0.1;  // gamma
};

// Additive Holt-Winters with period 12. Initial state from the first two
// seasons: trend = (mean(season 2) - mean(season 1)) / 12, seasonal indices are
// the first-season deviations from its trend line, and the level is the
// first-season mean carried to the end of that season. Smoothing runs from
// month 12 onward. Throws InsufficientData below 24 months.
std::vector<double> holt_winters_additive(const MonthlySeries& series, int horizon,
                                          const HoltWintersParams& params);

// One-step-ahead in-sample MAE of the recursion above.
double holt_winters_in_sample_mae(const MonthlySeries& series, const HoltWintersParams& params);

// Grid search over {0.1, ..., 0.9}^3 minimising in-sample one-step MAE; ties
// keep the first grid point in (level, trend, seasonal) lexicographic order.
HoltWintersParams fit_holt_winters(const MonthlySeries& series);

// holt_winters_additive with fitted parameters.
std::vector<double> holt_winters_forecast(const MonthlySeries& series, int horizon);

// y(t+h) = last observed value of the same calendar month.
std::vector<double> seasonal_naive(const MonthlySeries& series, int horizon);

// Mean of the k most recent observed same-calendar-month values.
std::vector<double> same_month_mean(const MonthlySeries& series, int horizon, int k_years = 3);

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;                // per month index
  std::vector<double> month_effect;  // 12 entries, January fixed at 0
  double predict(const MonthlySeries& series, std::size_t k) const;
};

// value ~ intercept + slope * t + 11 calendar-month indicators (January is the
// base level). Throws InsufficientData below 24 months, DegenerateFit when the
// design is rank deficient.
OlsFit ols_trend_seasonal_fit(const MonthlySeries& series);
std::vector<double> ols_trend_seasonal(const MonthlySeries& series, int horizon);

// A named forecasting method: (history, horizon) -> forecasts.
struct Forecaster {
  std::string name;
  std::function<std::vector<double>(const MonthlySeries&, int)> forecast;
};

std::vector<Forecaster> standard_forecasters();
// Throws InvalidInput for unknown names. Known: holt_winters, same_month_mean,
// seasonal_naive, ols_trend_seasonal.
Forecaster forecaster_by_name(const std::string& name);

struct BacktestCell {
  std::string method;
  int year = 0;
  int months = 0;  // evaluated months
  double abs_error_sum = 0.0;
  double actual_sum = 0.0;
  std::optional<std::string> error;  // set when the method failed for this year

  bool available() const { return !error.has_value(); }
  double mae() const { return months > 0 ? abs_error_sum / months : 0.0; }
};

struct BacktestSummary {
  std::string method;
  int months = 0;
  double mae = 0.0;
  double relative_mae = 0.0;  // MAE / mean actual over the evaluated cells
};

struct BacktestReport {
  std::vector<BacktestCell> cells;  // method-major, then year
  std::vector<BacktestSummary> pooled;
};

// Leave-one-year-out, expanding window: for each year y in [first_year,
// last_year], fit on months before January of y and score the months of y
// present in the series. Method failures are recorded per cell.
BacktestReport backtest_loyo(const MonthlySeries& series, const std::vector<Forecaster>& methods,
                             int first_year, int last_year);

// Three-year trailing first-time donor blood-group composition.
GroupValues first_time_donor_shares();

// total * share per group. Shares must be >= 0 and sum to 1 within 1e-6;
// throws InvalidInput otherwise.
GroupValues allocate_by_blood_shares(double total, const GroupValues& shares);

}  // namespace donorplan
