#include "donorplan/demand.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

std::string_view to_string(Component c) { return c == Component::CE ? "CE" : "CPP"; }

Component parse_component(std::string_view text) {
  if (text == "CE") return Component::CE;
  if (text == "CPP") return Component::CPP;
  throw InvalidInput(fmt::format("unknown component '{}'", text));
}

void DemandPanel::add(PlanningMonth month, BloodGroup group, Component component, double units) {
  if (!(units >= 0.0) || !std::isfinite(units)) {
    throw InvalidInput(fmt::format("demand units {} for {} {} must be finite and >= 0", units,
                                   month.str(), group.name()));
  }
  auto [it, inserted] = observations_.emplace(Key{month, group, component}, units);
  if (!inserted) {
    throw InvalidInput(fmt::format("duplicate demand observation {} {} {}", month.str(),
                                   group.name(), to_string(component)));
  }
}

std::optional<double> DemandPanel::get(PlanningMonth month, BloodGroup group,
                                       Component component) const {
  auto it = observations_.find(Key{month, group, component});
  if (it == observations_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> DemandPanel::equivalent(PlanningMonth month, BloodGroup group) const {
  const auto ce = get(month, group, Component::CE);
  const auto cpp = get(month, group, Component::CPP);
  if (!ce && !cpp) return std::nullopt;
  return donation_equivalent(ce.value_or(0.0), cpp.value_or(0.0));
}

std::vector<std::pair<int, double>> DemandPanel::same_month_history(unsigned calendar_month,
                                                                    BloodGroup group,
                                                                    int before_year) const {
  std::vector<std::pair<int, double>> out;
  if (observations_.empty()) return out;
  const int first_year = observations_.begin()->first.month.year;
  for (int y = first_year; y < before_year; ++y) {
    if (auto v = equivalent({y, calendar_month}, group)) out.emplace_back(y, *v);
  }
  return out;
}

DemandPanel DemandPanel::scaled(double factor) const {
  DemandPanel out;
  for (const auto& [k, v] : observations_) out.add(k.month, k.group, k.component, v * factor);
  return out;
}

void QuantileConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput(fmt::format("alpha {} outside (0,1)", alpha));
  if (min_history_years < 1) throw InvalidInput("min_history_years must be >= 1");
}

double donation_equivalent(double ce, double cpp) {
  if (!(ce >= 0.0) || !(cpp >= 0.0)) {
    throw InvalidInput(fmt::format("negative component demand (CE {}, CPP {})", ce, cpp));
  }
  return std::max(ce, 5.0 * cpp);
}

TrendFit fit_linear_trend(const std::vector<std::pair<int, double>>& history) {
  const auto n = static_cast<double>(history.size());
  TrendFit fit;
  if (history.empty()) return fit;
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& [x, y] : history) {
    mean_x += x;
    mean_y += y;
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : history) {
    sxx += (x - mean_x) * (x - mean_x);
    sxy += (x - mean_x) * (y - mean_y);
  }
  fit.mean_year = mean_x;
  fit.mean_value = mean_y;
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  if (history.size() < 3) return fit;  // no residual degrees of freedom

  double ssr = 0.0, sst = 0.0;
  for (const auto& [x, y] : history) {
    const double r = y - fit.at(x);
    ssr += r * r;
    sst += (y - mean_y) * (y - mean_y);
  }
  const double dof = n - 2.0;
  // Residuals at rounding level count as an exact fit.
  if (ssr <= 1e-24 * std::max(1.0, sst)) {
    fit.p_value = std::abs(fit.slope) > 0.0 ? 0.0 : 1.0;
    return fit;
  }
  const double se = std::sqrt(ssr / dof / sxx);
  const double t = fit.slope / se;
  boost::math::students_t dist(dof);
  fit.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return fit;
}

double empirical_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw InsufficientData("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * alpha;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double quantile_target(const std::vector<std::pair<int, double>>& history, int target_year,
                       const QuantileConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<int, double>> usable;
  for (const auto& h : history) {
    if (h.first < target_year) usable.push_back(h);
  }
  if (static_cast<int>(usable.size()) < cfg.min_history_years) {
    throw InsufficientData(fmt::format("{} history years before {} (need {})", usable.size(),
                                       target_year, cfg.min_history_years));
  }
  const TrendFit trend = fit_linear_trend(usable);
  double q;
  if (trend.p_value < cfg.trend_significance) {
    std::vector<double> residuals;
    residuals.reserve(usable.size());
    for (const auto& [x, y] : usable) residuals.push_back(y - trend.at(x));
    q = empirical_quantile(std::move(residuals), cfg.alpha) + trend.at(target_year);
  } else {
    std::vector<double> values;
    values.reserve(usable.size());
    for (const auto& h : usable) values.push_back(h.second);
    q = empirical_quantile(std::move(values), cfg.alpha);
  }
  return std::max(0.0, q);
}

double carry_forward_target(const MonthValues& history, PlanningMonth target) {
  const PlanningMonth prior{target.year - 1, target.month};
  auto it = history.find(prior);
  if (it == history.end()) {
    throw InsufficientData(fmt::format("no {} value to carry forward to {}", prior.str(),
                                       target.str()));
  }
  return it->second;
}

double residual_demand(double target, double predicted_organic) {
  const double r = target - predicted_organic;
  return r > 1e-9 ? r : 0.0;
}

}  // namespace donorplan
