#include "donorplan/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>

#include "donorplan/errors.hpp"
#include "donorplan/organic.hpp"

namespace donorplan {

void GenSpec::validate() const {
  if (n_donors < 0 || n_sessions < 0) throw InvalidInput("counts must be >= 0");
  if (n_sites < 1) throw InvalidInput("need at least one site");
  if (n_postal_codes < n_sites) throw InvalidInput("need at least one postal code per site");
  if (n_postal_codes > 900000) throw InvalidInput("too many postal codes");
  if (observed_months < 0 || observed_months > horizon_months) {
    throw InvalidInput("observed months must lie within the horizon");
  }
  if (!(observed_attendance >= 0.0 && observed_attendance <= 1.0)) {
    throw InvalidInput("observed attendance outside [0,1]");
  }
  if (horizon_months < 1 || history_years < 0 || panel_years < 0) {
    throw InvalidInput("horizon must be >= 1 month and history lengths >= 0");
  }
  double sum = 0.0;
  for (double s : blood_shares) {
    if (!(s >= 0.0)) throw InvalidInput("blood-group shares must be >= 0");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput(fmt::format("blood-group shares sum to {}, not 1", sum));
  }
  for (double r : {share_active, share_lapsing, adverse_rate, suspension_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput(fmt::format("rate {} outside [0,1]", r));
  }
  if (share_active + share_lapsing > 1.0 + 1e-12) {
    throw InvalidInput("active and lapsing shares exceed 1");
  }
  if (!(box.lat_min < box.lat_max && box.lon_min < box.lon_max) || box.lat_min < -90.0 ||
      box.lat_max > 90.0 || box.lon_min < -180.0 || box.lon_max > 180.0) {
    throw InvalidInput("invalid bounding box");
  }
  for (double v : {demand_per_thousand, demand_noise, session_capacity, first_time_per_thousand}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("levels must be finite and >= 0");
  }
}

namespace {

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  double normal(double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng_) : 0.0; }
  int categorical(const GroupValues& w) {
    return std::discrete_distribution<int>(w.begin(), w.end())(rng_);
  }

 private:
  std::mt19937_64 rng_;
};

double round_to(double v, double step) {
  const double per_unit = std::round(1.0 / step);
  return std::round(v * per_unit) / per_unit;
}

std::vector<Date> donation_dates(Draw& draw, const Donor& donor, Date last, Date earliest) {
  const int limit = annual_limit(donor);
  std::vector<Date> dates{last};
  Date cur = last;
  for (;;) {
    cur -= std::chrono::days{draw.integer(60, 400)};
    if (cur < earliest) break;
    for (;;) {
      int in_year = 0;
      for (Date d : dates) in_year += days_between(cur, d) < kRollingYearDays ? 1 : 0;
      if (in_year + 1 <= limit) break;
      cur -= std::chrono::days{30};
    }
    if (cur < earliest) break;
    dates.push_back(cur);
  }
  std::reverse(dates.begin(), dates.end());
  return dates;
}

}  // namespace

GeneratedData generate(const GenSpec& spec) {
  spec.validate();
  Draw draw(spec.seed);
  GeneratedData out;
  Registry& reg = out.registry;
  reg.as_of = spec.as_of;
  const auto& box = spec.box;
  auto random_point = [&] {
    return GeoPoint{draw.real(box.lat_min, box.lat_max), draw.real(box.lon_min, box.lon_max)};
  };

  std::vector<std::string> codes;
  {
    std::set<int> used;
    while (static_cast<int>(used.size()) < spec.n_postal_codes) used.insert(draw.integer(0, 899999));
    for (int c : used) {
      const std::string code = fmt::format("{:04}-{:03}", 1000 + c / 1000, c % 1000);
      out.postal_codes.insert(code, random_point());
      codes.push_back(code);
    }
  }

  std::vector<std::string> site_ids;
  {
    std::vector<std::string> pool = codes;
    for (int s = 0; s < spec.n_sites; ++s) {
      const int k = draw.integer(s, static_cast<int>(pool.size()) - 1);
      std::swap(pool[s], pool[k]);
      const std::string id = fmt::format("SITE{:02}", s + 1);
      site_ids.push_back(id);
      out.site_postal_codes[id] = pool[s];
      reg.site_locations[id] = *out.postal_codes.find(pool[s]);
    }
  }
  auto nearest_site = [&](const GeoPoint& p) {
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& id : site_ids) {
      const double d = haversine_km(p, reg.site_locations.at(id));
      if (d < best_d) {
        best_d = d;
        best = id;
      }
    }
    return best;
  };

  const Date horizon_end = PlanningMonth::of(spec.as_of).plus(spec.horizon_months).first_day();
  const Date history_start = spec.as_of - std::chrono::days{kRollingYearDays * spec.history_years};

  for (int i = 0; i < spec.n_donors; ++i) {
    Donor d;
    d.id = fmt::format("D{:06}", i + 1);
    d.sex = draw.chance(0.5) ? Sex::Male : Sex::Female;
    const int age = draw.integer(21, 64);
    d.birth_date = spec.as_of - std::chrono::days{age * 365 + age / 4 + draw.integer(0, 364)};
    d.blood_group = BloodGroup::from_index(draw.categorical(spec.blood_shares));
    d.adverse_reaction = draw.chance(spec.adverse_rate);
    d.home_postal_code = codes[static_cast<std::size_t>(draw.integer(0, spec.n_postal_codes - 1))];
    d.home_anchor = out.postal_codes.find(d.home_postal_code);

    const double u = draw.real(0.0, 1.0);
    std::optional<Date> last;
    double p_lo = 0.05, p_hi = 0.20;
    if (u < spec.share_active) {
      last = spec.as_of - std::chrono::days{draw.integer(1, 364)};
      p_lo = 0.30;
      p_hi = 0.90;
    } else if (u < spec.share_active + spec.share_lapsing) {
      last = spec.as_of - std::chrono::days{draw.integer(365, 729)};
      p_lo = 0.10;
      p_hi = 0.50;
    } else if (draw.chance(0.5)) {
      const int span = std::max(0, days_between(history_start, spec.as_of) - 730);
      if (span > 0) last = spec.as_of - std::chrono::days{730 + draw.integer(0, span)};
    }
    d.attendance_probability = round_to(draw.real(p_lo, p_hi), 0.05);

    if (last && *last >= history_start) {
      const std::string home_site = nearest_site(*d.home_anchor);
      for (Date when : donation_dates(draw, d, *last, history_start)) {
        const std::string site =
            draw.chance(0.8) ? home_site
                             : site_ids[static_cast<std::size_t>(draw.integer(0, spec.n_sites - 1))];
        d.donations.push_back({when, site});
      }
      d.last_brigade_anchor = reg.site_locations.at(d.donations.back().site_id);
    }
    if (draw.chance(spec.suspension_rate)) {
      const Date first = spec.as_of + std::chrono::days{draw.integer(-30, 300)};
      d.suspensions.push_back({first, first + std::chrono::days{draw.integer(30, 180)}});
    }
    std::set<Date> invites;
    for (int k = draw.integer(0, 3); k > 0; --k) {
      invites.insert(spec.as_of - std::chrono::days{draw.integer(1, 364)});
    }
    d.invitations_sent.assign(invites.begin(), invites.end());
    reg.donors.push_back(std::move(d));
  }

  // Starts cycle through the horizon months, uniform within the month.
  const PlanningMonth first_month = PlanningMonth::of(spec.as_of);
  for (int s = 0; s < spec.n_sessions; ++s) {
    SessionWindow w;
    w.site_id = site_ids[static_cast<std::size_t>(draw.integer(0, spec.n_sites - 1))];
    w.location = reg.site_locations.at(w.site_id);
    const PlanningMonth month = first_month.plus(s % spec.horizon_months);
    const Date lo = std::max(month.first_day(), spec.as_of);
    const Date hi = std::min(month.last_day(), horizon_end - std::chrono::days{1});
    w.start_date = lo + std::chrono::days{draw.integer(0, days_between(lo, hi))};
    w.end_date = w.start_date + std::chrono::days{draw.integer(0, 13)};
    for (Date day = w.start_date; day <= w.end_date; day += std::chrono::days{1}) {
      if (draw.chance(0.6)) w.admissible_dates.push_back(day);
    }
    if (w.admissible_dates.empty()) w.admissible_dates.push_back(w.start_date);
    w.capacity = round_to(spec.session_capacity * draw.real(0.5, 1.5), 0.5);
    reg.sessions.push_back(std::move(w));
  }
  std::sort(reg.sessions.begin(), reg.sessions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start_date, a.site_id, a.end_date) <
           std::tie(b.start_date, b.site_id, b.end_date);
  });
  for (std::size_t s = 0; s < reg.sessions.size(); ++s) {
    reg.sessions[s].id = fmt::format("S{:04}", s + 1);
  }

  const PlanningMonth first_panel{PlanningMonth::of(spec.as_of).year - spec.panel_years, 1};
  const PlanningMonth last_panel = PlanningMonth::of(horizon_end).plus(-1);
  const double monthly = spec.demand_per_thousand * spec.n_donors / 1000.0;
  for (PlanningMonth m = first_panel; m <= last_panel; m = m.plus(1)) {
    const double season = 1.0 + 0.08 * std::cos(2.0 * std::numbers::pi * (m.month - 1) / 12.0);
    const double trend = 1.0 + spec.demand_trend * (m.year - PlanningMonth::of(spec.as_of).year);
    for (const auto& g : all_blood_groups()) {
      const double base = monthly * spec.blood_shares[g.index()] * season * std::max(0.0, trend);
      const double ce = round_to(std::max(0.0, base * (1.0 + draw.normal(spec.demand_noise))), 0.1);
      const double cpp = round_to(std::max(0.0, base / 5.0 * draw.real(0.8, 1.1)), 0.1);
      out.panel.add(m, g, Component::CE, ce);
      out.panel.add(m, g, Component::CPP, cpp);
    }
  }

  std::vector<double> first_time;
  const double first_time_level = spec.first_time_per_thousand * spec.n_donors / 1000.0;
  const PlanningMonth as_of_month = PlanningMonth::of(spec.as_of);
  for (PlanningMonth m = first_panel; m < as_of_month; m = m.plus(1)) {
    const double season = 1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * (m.month - 1) / 12.0);
    first_time.push_back(
        std::max(0.0, std::round(first_time_level * season * (1.0 + draw.normal(0.08)))));
  }
  out.first_time = MonthlySeries(first_panel, std::move(first_time));

  if (spec.observed_months > 0) {
    const Date observed_end = PlanningMonth::of(spec.as_of).plus(spec.observed_months).first_day();
    for (auto& d : reg.donors) {
      const DonorStatus status = donor_status(d, spec.as_of);
      if (status == DonorStatus::Inactive || !d.home_anchor) continue;
      const std::string site = nearest_site(*d.home_anchor);
      for (const auto& s : reg.sessions) {
        if (s.site_id != site || s.start_date >= observed_end) continue;
        if (age_at(d, s.start_date) < 18 || age_at(d, s.start_date) > d.max_eligible_age) continue;
        if (std::any_of(d.suspensions.begin(), d.suspensions.end(),
                        [&](const DateInterval& iv) { return iv.contains(s.start_date); })) {
          continue;
        }
        if (!draw.chance(d.attendance_probability * spec.observed_attendance)) continue;
        const Date when = s.admissible_dates[static_cast<std::size_t>(
            draw.integer(0, static_cast<int>(s.admissible_dates.size()) - 1))];
        if (when >= observed_end) continue;
        if (const auto last = d.last_donation(); last && days_between(*last, when) < 60) continue;
        if (historical_donations(d, when) + 1 > annual_limit(d)) continue;
        d.donations.push_back({when, site});
        d.last_brigade_anchor = s.location;
      }
    }
    reg.as_of = observed_end;
  }
  return out;
}

}  // namespace donorplan
