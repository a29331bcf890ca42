#include "donorplan/solver_greedy.hpp"

#include <algorithm>

#include "donorplan/plan_eval.hpp"

namespace donorplan {

std::vector<DemandClass> scarcity_order(std::vector<ClassScarcity> classes) {
  std::stable_sort(classes.begin(), classes.end(), [](const auto& a, const auto& b) {
    const double sa = a.score(), sb = b.score();
    if (sa != sb) return sa < sb;
    return a.demand_class < b.demand_class;
  });
  std::vector<DemandClass> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(c.demand_class);
  return out;
}

namespace {

bool annual_limit_holds(const Donor& donor, const Registry& registry,
                        const std::vector<std::size_t>& sessions) {
  const int limit = annual_limit(donor);
  for (std::size_t a : sessions) {
    const Date t = registry.sessions[a].end_date;
    int count = historical_donations(donor, t);
    for (std::size_t b : sessions) {
      const Date end = registry.sessions[b].end_date;
      if (end <= t && days_between(end, t) < kRollingYearDays) ++count;
    }
    if (count > limit) return false;
  }
  return true;
}

}  // namespace

InvitationPlan greedy_assign(const FeasiblePairSet& pairs, const DemandTargets& targets,
                             const Registry& registry, const ModelConfig& model_cfg,
                             const EligibilityConfig& eligibility, GreedyState* final_state) {
  model_cfg.validate();
  GreedyState st;
  InvitationPlan plan;
  plan.solver = "greedy";
  ResourceMeter meter;
  meter.start();

  std::vector<ClassScarcity> classes;
  for (const auto& [cls, t] : targets) {
    if (t.residual <= 0.0) continue;
    auto it = pairs.by_class.find(cls);
    classes.push_back({cls, it == pairs.by_class.end() ? 0 : it->second.size(), t.residual});
  }

  bool all_met = true;
  for (const auto& cls : scarcity_order(classes)) {
    const double residual = targets.at(cls).residual;
    double& fulfilled = st.fulfilled[cls];
    auto it = pairs.by_class.find(cls);
    if (it != pairs.by_class.end()) {
      std::vector<std::size_t> order = it->second;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = pairs.pairs[a];
        const auto& pb = pairs.pairs[b];
        return std::tie(pa.adverse, pa.distance_km, pa.donor_id, pa.session_id) <
               std::tie(pb.adverse, pb.distance_km, pb.donor_id, pb.session_id);
      });

      for (std::size_t k : order) {
        if (fulfilled >= residual) break;
        const auto& p = pairs.pairs[k];
        const Donor& donor = registry.donors[p.donor_index];
        const SessionWindow& session = registry.sessions[p.session_index];

        double& used = st.capacity_used[p.session_id];
        if (used + p.donor_probability > session.capacity + 1e-12) continue;

        auto& accepted = st.donor_sessions[p.donor_index];
        const bool conflict = std::any_of(accepted.begin(), accepted.end(), [&](std::size_t j) {
          return windows_conflict(registry.sessions[j], session, eligibility.min_gap_days);
        });
        if (conflict) continue;

        std::vector<std::size_t> trial = accepted;
        trial.push_back(p.session_index);
        if (!annual_limit_holds(donor, registry, trial)) continue;

        int& invites = st.invites_used[p.donor_index];
        if (model_cfg.invite_cap_per_year &&
            invitations_in_window(donor, registry.as_of) + invites + 1 >
                *model_cfg.invite_cap_per_year) {
          continue;
        }

        used += p.donor_probability;
        fulfilled += p.donor_probability;
        ++invites;
        accepted = std::move(trial);
        auto& dates = st.donor_dates[p.donor_index];
        if (dates.empty()) {
          for (const auto& d : donor.donations) dates.push_back(d.date);
        }
        dates.insert(std::upper_bound(dates.begin(), dates.end(), session.earliest_admissible()),
                     session.earliest_admissible());
        plan.invitations.push_back({p.donor_id, p.session_id, session.earliest_admissible(),
                                    registry.as_of, p.distance_km, p.donor_probability,
                                    p.adverse});
      }
    }
    if (fulfilled < residual) all_met = false;
  }

  plan.sort();
  for (const auto& [cls, v] : st.fulfilled) {
    if (v > 0.0) plan.fulfilled[cls] = v;
    const double residual = targets.at(cls).residual;
    if (model_cfg.demand_mode == DemandMode::Soft && v < residual) plan.slack[cls] = residual - v;
  }
  plan.status = all_met ? "feasible" : "unmet_demand";
  plan.objective = plan_objective(plan, registry, targets, model_cfg);
  plan.resources = meter.stop();
  if (final_state) *final_state = std::move(st);
  return plan;
}

}  // namespace donorplan
