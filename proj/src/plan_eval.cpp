#include "donorplan/plan_eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "donorplan/errors.hpp"
#include "donorplan/geo.hpp"

namespace donorplan {

void InvitationPlan::sort() {
  std::sort(invitations.begin(), invitations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.donor_id, a.planned_date, a.session_id) <
           std::tie(b.donor_id, b.planned_date, b.session_id);
  });
}

std::string_view to_string(ViolationFamily f) {
  switch (f) {
    case ViolationFamily::Capacity:
      return "capacity";
    case ViolationFamily::Gap:
      return "gap";
    case ViolationFamily::AnnualLimit:
      return "annual_limit";
    case ViolationFamily::InviteCap:
      return "invite_cap";
    case ViolationFamily::Age:
      return "age";
    case ViolationFamily::Suspension:
      return "suspension";
    case ViolationFamily::Radius:
      return "radius";
    case ViolationFamily::HistoryGap:
      return "history_gap";
    case ViolationFamily::PlannedDate:
      return "planned_date";
    case ViolationFamily::Duplicate:
      return "duplicate";
    case ViolationFamily::Demand:
      return "demand";
  }
  return "?";
}

std::string Violation::str() const {
  return fmt::format("{} {} by {}: {}", to_string(family), subject, amount, detail);
}

namespace {

struct ResolvedInvitation {
  const PlannedInvitation* row;
  std::size_t donor;
  std::size_t session;
};

// Smallest |a - b| over the two sorted date sets.
int min_separation(const std::vector<Date>& a, const std::vector<Date>& b) {
  int best = std::numeric_limits<int>::max();
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    best = std::min(best, std::abs(days_between(a[i], b[j])));
    if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return best;
}

}  // namespace

std::vector<Violation> validate_plan(const InvitationPlan& plan, const Registry& registry,
                                     const DemandTargets& targets, const ValidationConfig& cfg) {
  const RegistryIndex index(registry);
  const double tol = cfg.tolerance;
  const int gap = cfg.eligibility.min_gap_days;

  std::vector<ResolvedInvitation> rows;
  for (const auto& inv : plan.invitations) {
    const auto d = index.donor(inv.donor_id);
    if (!d) throw InvalidInput(fmt::format("plan references unknown donor '{}'", inv.donor_id));
    const auto s = index.session(inv.session_id);
    if (!s) throw InvalidInput(fmt::format("plan references unknown session '{}'", inv.session_id));
    rows.push_back({&inv, *d, *s});
  }

  std::vector<Violation> out;
  auto report = [&](ViolationFamily f, std::string subject, double amount, std::string detail) {
    out.push_back({f, std::move(subject), amount, std::move(detail)});
  };

  // Per-invitation rules.
  // Repeated rows are reported once as duplicates and otherwise ignored.
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<ResolvedInvitation> unique;
  for (const auto& r : rows) {
    const Donor& donor = registry.donors[r.donor];
    const SessionWindow& session = registry.sessions[r.session];
    const std::string subject = fmt::format("{}@{}", donor.id, session.id);

    if (!seen.insert({r.donor, r.session}).second) {
      report(ViolationFamily::Duplicate, subject, 1.0, "pair invited more than once");
      continue;
    }
    unique.push_back(r);
    if (!std::binary_search(session.admissible_dates.begin(), session.admissible_dates.end(),
                            r.row->planned_date)) {
      report(ViolationFamily::PlannedDate, subject, 1.0,
             fmt::format("{} is not an admissible date", format_date(r.row->planned_date)));
    }
    if (donor.birth_date > session.start_date) {
      report(ViolationFamily::Age, subject, 1.0, "session starts before birth");
    } else {
      const int age = age_at(donor, session.start_date);
      if (age < cfg.eligibility.min_age) {
        report(ViolationFamily::Age, subject, cfg.eligibility.min_age - age,
               fmt::format("age {} below {}", age, cfg.eligibility.min_age));
      } else if (age > donor.max_eligible_age) {
        report(ViolationFamily::Age, subject, age - donor.max_eligible_age,
               fmt::format("age {} above {}", age, donor.max_eligible_age));
      }
    }
    for (const auto& s : donor.suspensions) {
      if (s.contains(session.start_date)) {
        report(ViolationFamily::Suspension, subject, 1.0,
               fmt::format("suspended {}..{}", format_date(s.first), format_date(s.last)));
        break;
      }
    }
    if (!donor.has_anchor()) {
      report(ViolationFamily::Radius, subject, 1.0, "donor has no anchor");
    } else {
      const double dist = donor_session_distance(donor, session);
      if (dist > cfg.eligibility.radius_km + tol) {
        report(ViolationFamily::Radius, subject, dist - cfg.eligibility.radius_km,
               fmt::format("{} km beyond radius {} km", dist, cfg.eligibility.radius_km));
      }
    }
    if (!donor.donations.empty()) {
      std::vector<Date> history;
      for (const auto& d : donor.donations) history.push_back(d.date);
      const int sep = min_separation(history, session.admissible_dates);
      if (sep < gap) {
        report(ViolationFamily::HistoryGap, subject, gap - sep,
               fmt::format("admissible date {} days from a past donation", sep));
      }
    }
  }

  // Capacity.
  std::map<std::size_t, double> used;
  for (const auto& r : unique) used[r.session] += registry.donors[r.donor].attendance_probability;
  for (const auto& [j, u] : used) {
    const double cap = registry.sessions[j].capacity;
    if (u > cap + tol) {
      report(ViolationFamily::Capacity, registry.sessions[j].id, u - cap,
             fmt::format("expected attendance {} over capacity {}", u, cap));
    }
  }

  // Per-donor temporal rules.
  std::map<std::size_t, std::vector<const ResolvedInvitation*>> by_donor;
  for (const auto& r : unique) by_donor[r.donor].push_back(&r);
  for (auto& [i, list] : by_donor) {
    const Donor& donor = registry.donors[i];
    std::sort(list.begin(), list.end(), [&](const auto* a, const auto* b) {
      const auto& sa = registry.sessions[a->session];
      const auto& sb = registry.sessions[b->session];
      return std::tie(sa.start_date, sa.id) < std::tie(sb.start_date, sb.id);
    });
    for (std::size_t a = 0; a < list.size(); ++a) {
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        if (list[a]->session == list[b]->session) continue;
        const auto& sa = registry.sessions[list[a]->session];
        const auto& sb = registry.sessions[list[b]->session];
        const int sep = min_separation(sa.admissible_dates, sb.admissible_dates);
        if (sep < gap) {
          report(ViolationFamily::Gap, fmt::format("{}@{}+{}", donor.id, sa.id, sb.id), gap - sep,
                 fmt::format("admissible dates {} days apart", sep));
        }
      }
    }

    const int limit = annual_limit(donor);
    for (const auto* anchor : list) {
      const Date t = registry.sessions[anchor->session].end_date;
      int planned = 0;
      for (const auto* other : list) {
        const Date end = registry.sessions[other->session].end_date;
        if (end <= t && days_between(end, t) < kRollingYearDays) ++planned;
      }
      const int total = planned + historical_donations(donor, t);
      if (total > limit) {
        report(ViolationFamily::AnnualLimit,
               fmt::format("{}@{}", donor.id, registry.sessions[anchor->session].id),
               total - limit,
               fmt::format("{} donations in the 365 days to {}, limit {}", total, format_date(t),
                           limit));
      }
    }

    if (cfg.invite_cap) {
      std::set<Date> anchors;
      for (const auto* r : list) anchors.insert(r->row->invited_on);
      for (Date t : anchors) {
        auto in_window = [&](Date d) { return d <= t && days_between(d, t) < kRollingYearDays; };
        int count = static_cast<int>(std::count_if(donor.invitations_sent.begin(),
                                                   donor.invitations_sent.end(), in_window));
        for (const auto* r : list) count += in_window(r->row->invited_on) ? 1 : 0;
        if (count > *cfg.invite_cap) {
          report(ViolationFamily::InviteCap, donor.id, count - *cfg.invite_cap,
                 fmt::format("{} invitations in the 365 days to {}, cap {}", count,
                             format_date(t), *cfg.invite_cap));
        }
      }
    }
  }

  if (cfg.check_demand) {
    const auto fulfilled = fulfilled_by_class(plan, registry);
    for (const auto& [cls, t] : targets) {
      if (t.residual <= 0.0) continue;
      auto it = fulfilled.find(cls);
      const double got = it == fulfilled.end() ? 0.0 : it->second;
      if (got < t.residual - tol) {
        report(ViolationFamily::Demand, cls.str(), t.residual - got,
               fmt::format("expected {} of residual {}", got, t.residual));
      }
    }
  }
  return out;
}

std::map<DemandClass, double> fulfilled_by_class(const InvitationPlan& plan,
                                                 const Registry& registry) {
  const RegistryIndex index(registry);
  std::map<DemandClass, double> out;
  for (const auto& inv : plan.invitations) {
    const auto d = index.donor(inv.donor_id);
    const auto s = index.session(inv.session_id);
    if (!d || !s) {
      throw InvalidInput(fmt::format("plan references unknown pair {}/{}", inv.donor_id,
                                     inv.session_id));
    }
    const auto& donor = registry.donors[*d];
    out[{registry.sessions[*s].month(), donor.blood_group}] += donor.attendance_probability;
  }
  return out;
}

PlanMetrics compute_metrics(const InvitationPlan& plan, const Registry& registry,
                            const DemandTargets& targets) {
  const RegistryIndex index(registry);
  PlanMetrics m;
  m.invitations = static_cast<int>(plan.invitations.size());
  const auto fulfilled = fulfilled_by_class(plan, registry);
  double need = 0.0, met = 0.0;
  for (const auto& [cls, t] : targets) {
    if (t.residual <= 0.0) continue;
    need += t.residual;
    auto it = fulfilled.find(cls);
    met += std::min(it == fulfilled.end() ? 0.0 : it->second, t.residual);
  }
  m.fulfillment_rate = need > 0.0 ? met / need : 1.0;

  std::set<std::string> adverse;
  std::map<std::string, int> non_hf;
  double dist = 0.0;
  for (const auto& inv : plan.invitations) {
    const auto& donor = registry.donors[*index.donor(inv.donor_id)];
    const auto& session = registry.sessions[*index.session(inv.session_id)];
    dist += donor_session_distance(donor, session);
    if (donor.adverse_reaction) adverse.insert(donor.id);
    if (!is_high_frequency(donor, registry.as_of)) ++non_hf[donor.id];
  }
  m.adverse_invited = static_cast<int>(adverse.size());
  m.avg_distance_km = plan.invitations.empty() ? 0.0 : dist / plan.invitations.size();
  int non_hf_total = 0;
  for (const auto& [id, n] : non_hf) non_hf_total += n;
  m.avg_invites_per_non_hf =
      non_hf.empty() ? 0.0 : static_cast<double>(non_hf_total) / static_cast<double>(non_hf.size());
  m.runtime_s = plan.resources.wall_seconds;
  m.peak_memory_mb = plan.resources.peak_memory_mb;
  return m;
}

ObjectiveBreakdown plan_objective(const InvitationPlan& plan, const Registry& registry,
                                  const DemandTargets& targets, const ModelConfig& cfg) {
  const RegistryIndex index(registry);
  ObjectiveBreakdown o;
  std::map<std::string, int> per_donor;
  for (const auto& inv : plan.invitations) {
    const auto& donor = registry.donors[*index.donor(inv.donor_id)];
    const auto& session = registry.sessions[*index.session(inv.session_id)];
    o.distance += cfg.w_dist * donor_session_distance(donor, session);
    if (donor.adverse_reaction) o.adverse += cfg.w_adv;
    ++per_donor[donor.id];
  }
  for (const auto& [id, n] : per_donor) {
    if (n >= 2 && !is_high_frequency(registry.donors[*index.donor(id)], registry.as_of)) {
      o.invite_penalty += cfg.w_inv;
    }
  }
  if (cfg.demand_mode == DemandMode::Soft) {
    const auto fulfilled = fulfilled_by_class(plan, registry);
    for (const auto& [cls, t] : targets) {
      if (t.residual <= 0.0) continue;
      auto it = fulfilled.find(cls);
      o.slack += cfg.w_dem * std::max(0.0, t.residual - (it == fulfilled.end() ? 0.0 : it->second));
    }
  }
  return o;
}

// --- Resources ---------------------------------------------------------------------------

namespace {

std::optional<double> read_peak_rss_mb() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream fields(line.substr(6));
      double kb = 0.0;
      if (fields >> kb) return kb / 1024.0;
    }
  }
  return std::nullopt;
}

}  // namespace

void ResourceMeter::start() {
  std::ofstream reset("/proc/self/clear_refs");
  peak_reset_ = static_cast<bool>(reset << "5");
  reset.close();
  peak_reset_ = peak_reset_ && !reset.fail();
  started_ = std::chrono::steady_clock::now();
}

ResourceUsage ResourceMeter::stop() const {
  ResourceUsage u;
  u.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  if (peak_reset_) u.peak_memory_mb = read_peak_rss_mb();
  return u;
}

}  // namespace donorplan
