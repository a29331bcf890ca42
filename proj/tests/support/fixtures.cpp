#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "donorplan/geo.hpp"

namespace donorplan::testing {

GeoPoint offset_km(GeoPoint origin, double north_km, double east_km) {
  const double dlat = north_km / kEarthRadiusKm * 180.0 / std::numbers::pi;
  const double dlon = east_km / (kEarthRadiusKm * std::cos(origin.lat * std::numbers::pi / 180.0)) *
                      180.0 / std::numbers::pi;
  return {origin.lat + dlat, origin.lon + dlon};
}

Donor make_donor(std::string id, Sex sex, Date birth, BloodGroup group, double p, GeoPoint home) {
  Donor d;
  d.id = std::move(id);
  d.sex = sex;
  d.birth_date = birth;
  d.blood_group = group;
  d.attendance_probability = p;
  d.home_anchor = home;
  return d;
}

SessionWindow make_session(std::string id, std::string site, GeoPoint where, Date start, Date end,
                           double capacity) {
  SessionWindow s;
  s.id = std::move(id);
  s.site_id = std::move(site);
  s.location = where;
  s.start_date = start;
  s.end_date = end;
  for (Date d = start; d <= end; d += std::chrono::days{1}) s.admissible_dates.push_back(d);
  s.capacity = capacity;
  return s;
}

SmallInstance random_small_instance(std::uint64_t seed, const SmallInstanceOptions& opt) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  SmallInstance inst;
  Registry& reg = inst.registry;
  reg.as_of = make_date(2020, 1, 1);

  const int n_sessions = uniform(2, 5);
  for (int s = 0; s < n_sessions; ++s) {
    const Date start = reg.as_of + std::chrono::days{uniform(1, 110)};
    const Date end = start + std::chrono::days{uniform(0, 14)};
    auto session = make_session("S" + std::to_string(s), "site" + std::to_string(uniform(0, 2)),
                                offset_km(kLisbon, uniform(-10, 10) / 10.0, uniform(-10, 10) / 10.0),
                                start, end, uniform(1, 8) * 0.25);
    // Drop some admissible days but keep at least one.
    std::vector<Date> kept;
    for (Date d : session.admissible_dates) {
      if (chance(0.7)) kept.push_back(d);
    }
    if (kept.empty()) kept.push_back(session.admissible_dates[uniform(0, static_cast<int>(session.admissible_dates.size()) - 1)]);
    session.admissible_dates = kept;
    reg.sessions.push_back(std::move(session));
  }

  const int n_donors = uniform(2, 7);
  for (int i = 0; i < n_donors; ++i) {
    const Sex sex = chance(0.5) ? Sex::Male : Sex::Female;
    const BloodGroup group = BloodGroup::from_index(chance(0.7) ? 0 : uniform(0, 2));
    auto donor = make_donor("D" + std::to_string(i), sex,
                            make_date(1960 + uniform(0, 40), 1 + uniform(0, 11), 1 + uniform(0, 27)),
                            group, uniform(1, 4) * 0.25,
                            offset_km(kLisbon, uniform(-30, 30) / 10.0, uniform(-30, 30) / 10.0));
    donor.adverse_reaction = chance(0.25);
    // History in 2019: up to the annual limit, spaced >= 60 days.
    const int n_hist = uniform(0, annual_limit(donor));
    Date d = make_date(2019, 1, 1) + std::chrono::days{uniform(0, 40)};
    for (int k = 0; k < n_hist && d <= reg.as_of - std::chrono::days{5}; ++k) {
      donor.donations.push_back({d, "site0"});
      d += std::chrono::days{uniform(60, 130)};
    }
    for (int k = uniform(0, 5); k > 0; --k) {
      donor.invitations_sent.push_back(make_date(2019, 1, 1) + std::chrono::days{uniform(0, 364)});
    }
    std::sort(donor.invitations_sent.begin(), donor.invitations_sent.end());
    reg.donors.push_back(std::move(donor));
  }

  inst.eligibility.radius_km = 3.0;
  inst.pairs = build_feasible_pairs(reg, inst.eligibility);
  if (inst.pairs.size() > opt.max_pairs) {
    // Keep a seeded subset, preserving order and the class index.
    std::vector<std::size_t> idx(inst.pairs.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(opt.max_pairs);
    std::sort(idx.begin(), idx.end());
    FeasiblePairSet trimmed;
    for (std::size_t k : idx) {
      trimmed.by_class[inst.pairs.pairs[k].demand_class()].push_back(trimmed.pairs.size());
      trimmed.pairs.push_back(inst.pairs.pairs[k]);
    }
    inst.pairs = std::move(trimmed);
  }
  if (opt.integer_distances) {
    for (auto& p : inst.pairs.pairs) p.distance_km = std::round(p.distance_km);
  }

  for (const auto& [cls, ks] : inst.pairs.by_class) {
    inst.targets[cls] = {0.0, uniform(0, 8) * 0.25};
  }
  if (chance(0.2)) {
    inst.targets[{PlanningMonth{2020, 2}, BloodGroup::from_index(7)}] = {0.0, 0.5};
  }

  const bool soft = opt.soft_mode < 0 ? chance(0.5) : opt.soft_mode == 1;
  inst.model_cfg.demand_mode = soft ? DemandMode::Soft : DemandMode::Hard;
  inst.model_cfg.w_dem = 100.0;
  const bool cap = opt.invite_cap < 0 ? chance(0.5) : opt.invite_cap == 1;
  if (cap) inst.model_cfg.invite_cap_per_year = kDefaultInviteCap;
  return inst;
}

}  // namespace donorplan::testing
