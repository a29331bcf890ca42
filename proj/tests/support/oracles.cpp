#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

namespace donorplan::testing {

namespace {

std::vector<Date> donation_dates(const Donor& d) {
  std::vector<Date> out;
  for (const auto& x : d.donations) out.push_back(x.date);
  return out;
}

int hand_age(Date birth, Date t) {
  const std::chrono::year_month_day b{birth};
  const std::chrono::year_month_day n{t};
  int age = static_cast<int>(n.year()) - static_cast<int>(b.year());
  const auto bm = static_cast<unsigned>(b.month()), nm = static_cast<unsigned>(n.month());
  const auto bd = static_cast<unsigned>(b.day()), nd = static_cast<unsigned>(n.day());
  if (nm < bm || (nm == bm && nd < bd)) --age;
  return age;
}

}  // namespace

double chord_distance_km(GeoPoint a, GeoPoint b) {
  const double k = std::numbers::pi / 180.0;
  auto unit = [k](GeoPoint p) {
    return std::array<double, 3>{std::cos(p.lat * k) * std::cos(p.lon * k),
                                 std::cos(p.lat * k) * std::sin(p.lon * k), std::sin(p.lat * k)};
  };
  const auto u = unit(a), v = unit(b);
  const double chord =
      std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * 6371.0 * std::asin(std::min(1.0, chord / 2.0));
}

int count_in_year_to(const std::vector<Date>& dates, Date t) {
  int c = 0;
  for (Date d : dates) {
    const auto age = (t - d).count();
    if (age >= 0 && age < 365) ++c;
  }
  return c;
}

bool annual_limit_holds(const std::vector<Date>& history, const std::vector<Date>& planned_ends,
                        int limit) {
  for (Date t : planned_ends) {
    if (count_in_year_to(history, t) + count_in_year_to(planned_ends, t) > limit) return false;
  }
  return true;
}

bool pair_admissible(const Donor& donor, const SessionWindow& session,
                     const EligibilityConfig& cfg) {
  const Date start = session.start_date;
  if (start < donor.birth_date) return false;
  const int age = hand_age(donor.birth_date, start);
  if (age < cfg.min_age || age > donor.max_eligible_age) return false;
  for (const auto& s : donor.suspensions) {
    if (s.first <= start && start <= s.last) return false;
  }
  for (const auto& d : donor.donations) {
    if ((session.admissible_dates.front() - d.date).count() < cfg.min_gap_days) return false;
  }
  double best = kNoSolution;
  if (donor.home_anchor) best = std::min(best, chord_distance_km(*donor.home_anchor, session.location));
  if (donor.last_brigade_anchor) {
    best = std::min(best, chord_distance_km(*donor.last_brigade_anchor, session.location));
  }
  return best <= cfg.radius_km;
}

double enumerate_optimum(const SmallInstance& inst) {
  const auto& reg = inst.registry;
  const auto& pairs = inst.pairs.pairs;
  const auto& cfg = inst.model_cfg;
  const int gap = inst.eligibility.min_gap_days;
  const std::size_t n = pairs.size();

  double best = kNoSolution;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::map<std::size_t, double> used;
    std::map<DemandClass, double> got;
    std::map<std::size_t, std::vector<std::size_t>> chosen;
    double obj = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(mask >> k & 1u)) continue;
      used[pairs[k].session_index] += pairs[k].donor_probability;
      got[pairs[k].demand_class()] += pairs[k].donor_probability;
      chosen[pairs[k].donor_index].push_back(pairs[k].session_index);
      obj += cfg.w_dist * pairs[k].distance_km + (pairs[k].adverse ? cfg.w_adv : 0.0);
    }
    bool ok = true;
    for (const auto& [j, u] : used) ok = ok && u <= reg.sessions[j].capacity + 1e-9;
    for (const auto& [cls, t] : inst.targets) {
      if (t.residual <= 0.0) continue;
      const double short_by = std::max(0.0, t.residual - got[cls]);
      if (cfg.demand_mode == DemandMode::Hard) {
        ok = ok && short_by <= 1e-9;
      } else {
        obj += cfg.w_dem * short_by;
      }
    }
    for (const auto& [i, sessions] : chosen) {
      const Donor& d = reg.donors[i];
      std::vector<Date> ends;
      for (std::size_t a = 0; a < sessions.size(); ++a) {
        const auto& sa = reg.sessions[sessions[a]];
        ends.push_back(sa.end_date);
        for (std::size_t b = 0; b < sessions.size(); ++b) {
          if (a == b) continue;
          const auto& sb = reg.sessions[sessions[b]];
          if (sa.start_date == sb.start_date) ok = false;
          if (sa.start_date < sb.start_date && (sb.start_date - sa.end_date).count() < gap) {
            ok = false;
          }
        }
      }
      const int limit = d.sex == Sex::Male ? 4 : 3;
      ok = ok && annual_limit_holds(donation_dates(d), ends, limit);
      if (cfg.invite_cap_per_year) {
        const int sent = count_in_year_to(d.invitations_sent, reg.as_of);
        ok = ok && sent + static_cast<int>(sessions.size()) <= *cfg.invite_cap_per_year;
      }
      const bool hf =
          count_in_year_to(donation_dates(d), reg.as_of) >= (d.sex == Sex::Male ? 3 : 2);
      if (!hf && sessions.size() >= 2) obj += cfg.w_inv;
    }
    if (ok) best = std::min(best, obj);
  }
  return best;
}

PlanCase greedy_case(std::uint64_t seed) {
  PlanCase c;
  c.inst = random_small_instance(seed, {.max_pairs = 1000});
  c.plan = greedy_assign(c.inst.pairs, c.inst.targets, c.inst.registry, c.inst.model_cfg,
                         c.inst.eligibility);
  c.validation.eligibility = c.inst.eligibility;
  c.validation.invite_cap = c.inst.model_cfg.invite_cap_per_year;
  return c;
}

std::optional<PlanCase> inject(const PlanCase& base, ViolationFamily family, std::uint64_t seed) {
  if (base.plan.invitations.empty()) return std::nullopt;
  std::mt19937_64 rng(seed);
  PlanCase c = base;
  Registry& reg = c.inst.registry;
  auto& rows = c.plan.invitations;
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, rows.size() - 1)(rng);
  const PlannedInvitation row = rows[pick];
  const RegistryIndex index(reg);
  Donor& donor = reg.donors[*index.donor(row.donor_id)];
  SessionWindow& session = reg.sessions[*index.session(row.session_id)];
  const int gap = c.validation.eligibility.min_gap_days;
  const int limit = donor.sex == Sex::Male ? 4 : 3;

  // The donor's invited sessions in the plan.
  std::vector<const SessionWindow*> own;
  for (const auto& r : rows) {
    if (r.donor_id == donor.id) own.push_back(&reg.sessions[*index.session(r.session_id)]);
  }
  std::vector<Date> ends;
  Date first_admissible = own.front()->earliest_admissible();
  const SessionWindow* first_session = own.front();
  for (const auto* s : own) {
    ends.push_back(s->end_date);
    first_admissible = std::min(first_admissible, s->earliest_admissible());
    if (s->start_date < first_session->start_date) first_session = s;
  }
  auto draw = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  switch (family) {
    case ViolationFamily::Capacity: {
      double used = 0.0;
      for (const auto& r : rows) {
        if (r.session_id == session.id) used += reg.donors[*index.donor(r.donor_id)].attendance_probability;
      }
      session.capacity = used - 0.125;
      break;
    }
    case ViolationFamily::Gap: {
      SessionWindow extra;
      extra.id = "INJECTED";
      extra.site_id = session.site_id;
      extra.location = session.location;
      extra.start_date = session.latest_admissible() + std::chrono::days{draw(1, gap - 1)};
      extra.end_date = extra.start_date + std::chrono::days{draw(0, 3)};
      for (Date d = extra.start_date; d <= extra.end_date; d += std::chrono::days{1}) {
        extra.admissible_dates.push_back(d);
      }
      extra.capacity = 100.0;
      auto with_extra = ends;
      with_extra.push_back(extra.end_date);
      if (!annual_limit_holds(donation_dates(donor), with_extra, limit)) return std::nullopt;
      if (c.validation.invite_cap &&
          count_in_year_to(donor.invitations_sent, reg.as_of) + static_cast<int>(own.size()) + 1 >
              *c.validation.invite_cap) {
        return std::nullopt;
      }
      const int age = hand_age(donor.birth_date, extra.start_date);
      if (age > donor.max_eligible_age) return std::nullopt;
      PlannedInvitation inv = row;
      inv.session_id = extra.id;
      inv.planned_date = extra.start_date;
      reg.sessions.push_back(std::move(extra));
      rows.push_back(inv);
      break;
    }
    case ViolationFamily::AnnualLimit: {
      const Date lo = first_session->end_date - std::chrono::days{364};
      const Date hi = first_admissible - std::chrono::days{gap};
      if ((hi - lo).count() < (limit - 1) * gap) return std::nullopt;
      donor.donations.clear();
      for (int k = limit - 1; k >= 0; --k) {
        donor.donations.push_back({hi - std::chrono::days{k * gap}, "site0"});
      }
      break;
    }
    case ViolationFamily::InviteCap: {
      c.validation.invite_cap = kDefaultInviteCap;
      donor.invitations_sent.clear();
      for (int k = kDefaultInviteCap; k >= 1; --k) {
        donor.invitations_sent.push_back(reg.as_of - std::chrono::days{k * draw(1, 60)});
      }
      std::sort(donor.invitations_sent.begin(), donor.invitations_sent.end());
      break;
    }
    case ViolationFamily::Age: {
      const std::chrono::year_month_day start{session.start_date};
      donor.birth_date = make_date(static_cast<int>(start.year()) - draw(5, 16), 1 + draw(0, 11),
                                   1 + draw(0, 27));
      break;
    }
    case ViolationFamily::Suspension: {
      const Date s = session.start_date;
      donor.suspensions.push_back({s - std::chrono::days{draw(0, 30)}, s + std::chrono::days{draw(0, 30)}});
      break;
    }
    case ViolationFamily::Radius: {
      const GeoPoint anchor = *donor.home_anchor;
      donor.home_anchor = offset_km(anchor, draw(20, 80), draw(-20, 20));
      donor.last_brigade_anchor.reset();
      break;
    }
    case ViolationFamily::HistoryGap: {
      const Date d = first_admissible - std::chrono::days{draw(1, gap - 1)};
      if (!annual_limit_holds({d}, ends, limit)) return std::nullopt;
      donor.donations = {{d, "site0"}};
      break;
    }
    case ViolationFamily::PlannedDate: {
      rows[pick].planned_date = session.end_date + std::chrono::days{draw(1, 10)};
      break;
    }
    case ViolationFamily::Duplicate: {
      rows.push_back(row);
      break;
    }
    case ViolationFamily::Demand: {
      c.validation.check_demand = true;
      const auto got = fulfilled_by_class(c.plan, reg);
      c.inst.targets.clear();
      for (const auto& [cls, v] : got) c.inst.targets[cls] = {v, v};
      const DemandClass cls{session.month(), donor.blood_group};
      c.inst.targets[cls].residual += draw(1, 8) * 0.25;
      break;
    }
  }
  c.plan.sort();
  return c;
}

}  // namespace donorplan::testing
