#include "donorplan/eligibility.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

#include "donorplan/errors.hpp"
#include "donorplan/geo.hpp"

namespace donorplan {

void EligibilityConfig::validate() const {
  if (!(radius_km > 0.0)) throw InvalidInput(fmt::format("radius {} km must be positive", radius_km));
  if (min_gap_days < 0) throw InvalidInput("minimum donation gap must be nonnegative");
}

namespace {

bool passes_non_distance_checks(const Donor& donor, const SessionWindow& session,
                                const EligibilityConfig& cfg) {
  const Date start = session.start_date;
  if (start < donor.birth_date) return false;
  const int age = age_at(donor, start);
  if (age < cfg.min_age || age > donor.max_eligible_age) return false;
  for (const auto& s : donor.suspensions) {
    if (s.contains(start)) return false;
  }
  if (const auto last = donor.last_donation()) {
    if (days_between(*last, session.earliest_admissible()) < cfg.min_gap_days) return false;
  }
  return true;
}

}  // namespace

bool static_checks(const Donor& donor, const SessionWindow& session,
                   const EligibilityConfig& cfg) {
  const double distance = donor_session_distance(donor, session);
  return passes_non_distance_checks(donor, session, cfg) && distance <= cfg.radius_km;
}

FeasiblePairSet build_feasible_pairs(const Registry& registry, const EligibilityConfig& cfg) {
  cfg.validate();
  FeasiblePairSet out;
  for (std::size_t j = 0; j < registry.sessions.size(); ++j) {
    const auto& session = registry.sessions[j];
    for (std::size_t i = 0; i < registry.donors.size(); ++i) {
      const auto& donor = registry.donors[i];
      if (!donor.has_anchor()) continue;
      const double distance = donor_session_distance(donor, session);
      if (distance > cfg.radius_km) continue;
      if (!passes_non_distance_checks(donor, session, cfg)) continue;
      out.pairs.push_back(FeasiblePair{
          .donor_index = i,
          .session_index = j,
          .donor_id = donor.id,
          .session_id = session.id,
          .distance_km = distance,
          .month = session.month(),
          .blood_group = donor.blood_group,
          .donor_probability = donor.attendance_probability,
          .adverse = donor.adverse_reaction,
      });
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end(), [](const FeasiblePair& a, const FeasiblePair& b) {
    return std::tie(a.month, a.blood_group, a.session_id, a.donor_id) <
           std::tie(b.month, b.blood_group, b.session_id, b.donor_id);
  });
  for (std::size_t k = 0; k < out.pairs.size(); ++k) {
    out.by_class[out.pairs[k].demand_class()].push_back(k);
  }
  return out;
}

bool windows_conflict(const SessionWindow& a, const SessionWindow& b, int min_gap_days) {
  if (a.start_date == b.start_date) return true;
  const SessionWindow& first = a.start_date <= b.start_date ? a : b;
  const SessionWindow& second = a.start_date <= b.start_date ? b : a;
  return days_between(first.end_date, second.start_date) < min_gap_days;
}

}  // namespace donorplan
