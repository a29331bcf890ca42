#pragma once

#include <map>
#include <string>
#include <vector>

#include "donorplan/core_model.hpp"

namespace donorplan {

enum class DonorStatus { Active, Lapsing, Inactive };

// Active: a donation in the last 365 days; lapsing: in the last 730 days but
// not the last 365; inactive otherwise.
DonorStatus donor_status(const Donor& donor, Date as_of);
std::string_view to_string(DonorStatus s);

struct DonorMonthProbability {
  std::size_t donor_index = 0;
  PlanningMonth month;
  double probability = 0.0;
};

// Predicts which registered donors will attend without an invitation. The
// returning-donor models plug in here.
class OrganicProvider {
 public:
  virtual ~OrganicProvider() = default;
  virtual std::string name() const = 0;
  // Only nonzero probabilities need to be reported. Must be deterministic.
  virtual std::vector<DonorMonthProbability> predict(
      const Registry& registry, const std::vector<PlanningMonth>& horizon) const = 0;
};

// Every active donor attends each month with the configured probability.
class ConstantProbabilityProvider final : public OrganicProvider {
 public:
  explicit ConstantProbabilityProvider(double probability);
  std::string name() const override { return "constant"; }
  std::vector<DonorMonthProbability> predict(
      const Registry& registry, const std::vector<PlanningMonth>& horizon) const override;

 private:
  double probability_;
};

// Per status cohort and calendar month: the fraction of the cohort that
// donated in that calendar month, averaged over the last `lookback_years`
// years before the as-of date.
class HistoricalShareProvider final : public OrganicProvider {
 public:
  explicit HistoricalShareProvider(int lookback_years = 3);
  std::string name() const override { return "historical_share"; }
  std::vector<DonorMonthProbability> predict(
      const Registry& registry, const std::vector<PlanningMonth>& horizon) const override;

 private:
  int lookback_years_;
};

struct OrganicSupplyEstimate {
  std::map<DemandClass, double> by_class;       // expected donations
  std::map<std::string, double> by_session;     // expected organic attendance
  std::vector<DonorMonthProbability> donor_probabilities;
};

// Most frequent donation site; ties go to the most recently visited of the
// tied sites. Empty when no donation carries a site.
std::string modal_site(const Donor& donor);

// Returning-donor expectations from the provider plus the first-time forecast
// (one value per horizon month) split by blood-group shares. Session
// attendance: each donor's expectation goes to the sessions of their modal
// site in that month, or to the nearest site with sessions that month when the
// modal site has none; donors without a locatable site, and first-time donors,
// are spread over the month's sessions in proportion to capacity.
OrganicSupplyEstimate organic_estimate(const OrganicProvider& provider, const Registry& registry,
                                       const std::vector<PlanningMonth>& horizon,
                                       const std::vector<double>& first_time_forecast,
                                       const GroupValues& blood_shares);

}  // namespace donorplan
