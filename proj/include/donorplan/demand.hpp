#pragma once

#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "donorplan/core_model.hpp"

namespace donorplan {

enum class Component : std::uint8_t { CE, CPP };

std::string_view to_string(Component c);
Component parse_component(std::string_view text);

// Monthly consumption by blood group and component.
class DemandPanel {
 public:
  struct Key {
    PlanningMonth month;
    BloodGroup group;
    Component component;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  // Throws InvalidInput on a duplicate key or negative units.
  void add(PlanningMonth month, BloodGroup group, Component component, double units);
  std::optional<double> get(PlanningMonth month, BloodGroup group, Component component) const;
  const std::map<Key, double>& observations() const { return observations_; }
  bool empty() const { return observations_.empty(); }

  // Donation-equivalent demand max(CE, 5 CPP), with a missing component read
  // as zero. nullopt when neither component is recorded for that class.
  std::optional<double> equivalent(PlanningMonth month, BloodGroup group) const;

  // (year, equivalent) for the given calendar month and group, for all years
  // strictly before before_year that have data.
  std::vector<std::pair<int, double>> same_month_history(unsigned calendar_month, BloodGroup group,
                                                         int before_year) const;

  // Multiplies every observation; used for demand-scaled stress scenarios.
  DemandPanel scaled(double factor) const;

  friend bool operator==(const DemandPanel&, const DemandPanel&) = default;

 private:
  std::map<Key, double> observations_;
};

struct DemandTarget {
  double target = 0.0;    // donation equivalents
  double residual = 0.0;  // after organic supply, in expected-attendance units
};

using DemandTargets = std::map<DemandClass, DemandTarget>;

struct QuantileConfig {
  double alpha = 0.8;
  double trend_significance = 0.10;
  int min_history_years = 3;

  void validate() const;
};

// max(ce, 5 cpp). Throws InvalidInput on negative input.
double donation_equivalent(double ce, double cpp);

// Least-squares line through (year, value), stored centred on the mean year.
struct TrendFit {
  double mean_year = 0.0;
  double mean_value = 0.0;
  double slope = 0.0;
  double p_value = 1.0;  // two-sided t-test on the slope
  double at(double year) const { return mean_value + slope * (year - mean_year); }
};

TrendFit fit_linear_trend(const std::vector<std::pair<int, double>>& history);

// Empirical quantile with linear interpolation between order statistics
// (position (n - 1) * alpha on the sorted sample).
double empirical_quantile(std::vector<double> values, double alpha);

// Trend-corrected quantile target for target_year. Only history years strictly
// before target_year are used. If the slope is significant at
// cfg.trend_significance the quantile is taken over detrended residuals and the
// trend is re-added at target_year; otherwise the plain quantile of the values.
// Clamped to >= 0 last. Throws InsufficientData.
double quantile_target(const std::vector<std::pair<int, double>>& history, int target_year,
                       const QuantileConfig& cfg);

using MonthValues = std::map<PlanningMonth, double>;

// Prior-year same-month value. Throws InsufficientData when absent.
double carry_forward_target(const MonthValues& history, PlanningMonth target);

// max(0, target - predicted_organic); differences below 1e-9 count as zero.
double residual_demand(double target, double predicted_organic);

}  // namespace donorplan
