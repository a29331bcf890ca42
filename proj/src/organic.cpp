#include "donorplan/organic.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "donorplan/errors.hpp"
#include "donorplan/forecast.hpp"
#include "donorplan/geo.hpp"

namespace donorplan {

DonorStatus donor_status(const Donor& donor, Date as_of) {
  const auto last = donor.last_donation();
  if (!last) return DonorStatus::Inactive;
  const int age = days_between(*last, as_of);
  if (age < kRollingYearDays) return DonorStatus::Active;
  if (age < 2 * kRollingYearDays) return DonorStatus::Lapsing;
  return DonorStatus::Inactive;
}

std::string_view to_string(DonorStatus s) {
  switch (s) {
    case DonorStatus::Active:
      return "active";
    case DonorStatus::Lapsing:
      return "lapsing";
    case DonorStatus::Inactive:
      return "inactive";
  }
  return "inactive";
}

ConstantProbabilityProvider::ConstantProbabilityProvider(double probability)
    : probability_(probability) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw InvalidInput(fmt::format("organic probability {} outside [0,1]", probability));
  }
}

std::vector<DonorMonthProbability> ConstantProbabilityProvider::predict(
    const Registry& registry, const std::vector<PlanningMonth>& horizon) const {
  std::vector<DonorMonthProbability> out;
  if (probability_ == 0.0) return out;
  for (std::size_t i = 0; i < registry.donors.size(); ++i) {
    if (donor_status(registry.donors[i], registry.as_of) != DonorStatus::Active) continue;
    for (const auto& m : horizon) out.push_back({i, m, probability_});
  }
  return out;
}

HistoricalShareProvider::HistoricalShareProvider(int lookback_years)
    : lookback_years_(lookback_years) {
  if (lookback_years < 1) throw InvalidInput("lookback_years must be >= 1");
}

std::vector<DonorMonthProbability> HistoricalShareProvider::predict(
    const Registry& registry, const std::vector<PlanningMonth>& horizon) const {
  const PlanningMonth as_of_month = PlanningMonth::of(registry.as_of);
  std::array<std::vector<std::size_t>, 3> cohorts;
  for (std::size_t i = 0; i < registry.donors.size(); ++i) {
    cohorts[static_cast<int>(donor_status(registry.donors[i], registry.as_of))].push_back(i);
  }

  std::vector<DonorMonthProbability> out;
  for (const auto& m : horizon) {
    // Same calendar month in earlier years, strictly before the as-of month.
    std::vector<PlanningMonth> lookback;
    for (PlanningMonth p = m.plus(-12); static_cast<int>(lookback.size()) < lookback_years_;
         p = p.plus(-12)) {
      if (p < as_of_month) lookback.push_back(p);
      if (p.year < as_of_month.year - 200) break;
    }
    for (const auto& cohort : cohorts) {
      if (cohort.empty()) continue;
      double rate = 0.0;
      for (const auto& p : lookback) {
        std::size_t donated = 0;
        for (std::size_t i : cohort) {
          const auto& don = registry.donors[i].donations;
          if (std::any_of(don.begin(), don.end(),
                          [&](const Donation& d) { return PlanningMonth::of(d.date) == p; })) {
            ++donated;
          }
        }
        rate += static_cast<double>(donated) / static_cast<double>(cohort.size());
      }
      rate /= static_cast<double>(lookback.size());
      if (rate <= 0.0) continue;
      for (std::size_t i : cohort) out.push_back({i, m, rate});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.donor_index, a.month) < std::tie(b.donor_index, b.month);
  });
  return out;
}

std::string modal_site(const Donor& donor) {
  std::map<std::string, std::pair<int, std::size_t>> counts;  // site -> (count, last position)
  for (std::size_t k = 0; k < donor.donations.size(); ++k) {
    const auto& site = donor.donations[k].site_id;
    if (site.empty()) continue;
    auto& c = counts[site];
    ++c.first;
    c.second = k;
  }
  std::string best;
  std::pair<int, std::size_t> best_key{0, 0};
  for (const auto& [site, key] : counts) {
    if (best.empty() || key > best_key) {
      best = site;
      best_key = key;
    }
  }
  return best;
}

namespace {

// Sessions of one month, with per-site grouping and site coordinates.
struct MonthSchedule {
  std::vector<std::size_t> sessions;
  std::map<std::string, std::vector<std::size_t>> by_site;
  std::map<std::string, GeoPoint> site_location;
};

void spread_by_capacity(const Registry& registry, const std::vector<std::size_t>& sessions,
                        double amount, std::map<std::string, double>& by_session) {
  if (sessions.empty() || amount == 0.0) return;
  double total = 0.0;
  for (std::size_t j : sessions) total += registry.sessions[j].capacity;
  for (std::size_t j : sessions) {
    const double share = total > 0.0 ? registry.sessions[j].capacity / total
                                     : 1.0 / static_cast<double>(sessions.size());
    by_session[registry.sessions[j].id] += amount * share;
  }
}

std::optional<GeoPoint> locate_site(const Registry& registry, const std::string& site) {
  if (auto it = registry.site_locations.find(site); it != registry.site_locations.end()) {
    return it->second;
  }
  for (const auto& s : registry.sessions) {
    if (s.site_id == site) return s.location;
  }
  return std::nullopt;
}

}  // namespace

OrganicSupplyEstimate organic_estimate(const OrganicProvider& provider, const Registry& registry,
                                       const std::vector<PlanningMonth>& horizon,
                                       const std::vector<double>& first_time_forecast,
                                       const GroupValues& blood_shares) {
  if (!first_time_forecast.empty() && first_time_forecast.size() != horizon.size()) {
    throw InvalidInput("first-time forecast length differs from the horizon");
  }
  OrganicSupplyEstimate est;
  est.donor_probabilities = provider.predict(registry, horizon);

  std::map<PlanningMonth, MonthSchedule> schedule;
  for (const auto& m : horizon) schedule[m];
  for (std::size_t j = 0; j < registry.sessions.size(); ++j) {
    const auto& s = registry.sessions[j];
    auto it = schedule.find(s.month());
    if (it == schedule.end()) continue;
    it->second.sessions.push_back(j);
    it->second.by_site[s.site_id].push_back(j);
    it->second.site_location.emplace(s.site_id, s.location);
  }

  std::vector<std::string> modal(registry.donors.size());
  std::vector<bool> modal_done(registry.donors.size(), false);

  for (const auto& dp : est.donor_probabilities) {
    if (dp.probability < 0.0) throw InvalidInput("provider returned a negative probability");
    const auto& donor = registry.donors.at(dp.donor_index);
    est.by_class[{dp.month, donor.blood_group}] += dp.probability;

    auto sched_it = schedule.find(dp.month);
    if (sched_it == schedule.end()) continue;
    const auto& sched = sched_it->second;
    if (!modal_done[dp.donor_index]) {
      modal[dp.donor_index] = modal_site(donor);
      modal_done[dp.donor_index] = true;
    }
    const std::string& site = modal[dp.donor_index];
    if (auto it = sched.by_site.find(site); !site.empty() && it != sched.by_site.end()) {
      spread_by_capacity(registry, it->second, dp.probability, est.by_session);
      continue;
    }
    const auto where = site.empty() ? std::nullopt : locate_site(registry, site);
    if (!where || sched.site_location.empty()) {
      spread_by_capacity(registry, sched.sessions, dp.probability, est.by_session);
      continue;
    }
    const std::string* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [sid, loc] : sched.site_location) {
      const double d = haversine_km(*where, loc);
      if (d < best) {
        best = d;
        nearest = &sid;
      }
    }
    spread_by_capacity(registry, sched.by_site.at(*nearest), dp.probability, est.by_session);
  }

  for (std::size_t k = 0; k < first_time_forecast.size(); ++k) {
    const double total = std::max(0.0, first_time_forecast[k]);
    const auto split = allocate_by_blood_shares(total, blood_shares);
    for (const auto& g : all_blood_groups()) {
      if (split[g.index()] > 0.0) est.by_class[{horizon[k], g}] += split[g.index()];
    }
    spread_by_capacity(registry, schedule[horizon[k]].sessions, total, est.by_session);
  }
  return est;
}

}  // namespace donorplan
