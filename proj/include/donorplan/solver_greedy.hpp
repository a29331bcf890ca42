#pragma once

#include <map>
#include <string>
#include <vector>

#include "donorplan/bilp_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/eligibility.hpp"
#include "donorplan/plan.hpp"

namespace donorplan {

struct ClassScarcity {
  DemandClass demand_class;
  std::size_t pair_count = 0;
  double residual = 0.0;  // > 0

  double score() const { return static_cast<double>(pair_count) / residual; }
};

// Increasing scarcity score; ties by month, then canonical blood-group order.
std::vector<DemandClass> scarcity_order(std::vector<ClassScarcity> classes);

struct GreedyState {
  std::map<DemandClass, double> fulfilled;
  std::map<std::string, double> capacity_used;  // by session id
  // Historical donation dates plus the earliest admissible date of every
  // accepted session, per donor index.
  std::map<std::size_t, std::vector<Date>> donor_dates;
  std::map<std::size_t, std::vector<std::size_t>> donor_sessions;  // accepted session indices
  std::map<std::size_t, int> invites_used;
};

// Scarcity-ordered greedy. Within a class, pairs go non-adverse first, then by
// ascending distance, donor id and session id. A pair is accepted when the
// session keeps sum p <= capacity, the donor's sessions stay pairwise
// conflict-free, every 365-day window ending at an accepted session's end date
// holds at most the annual limit (history included), and the invitation cap is
// respected. A class stops once fulfilled >= residual. Planned dates are the
// earliest admissible date of each window; invitations go out on
// registry.as_of.
InvitationPlan greedy_assign(const FeasiblePairSet& pairs, const DemandTargets& targets,
                             const Registry& registry, const ModelConfig& model_cfg,
                             const EligibilityConfig& eligibility,
                             GreedyState* final_state = nullptr);

}  // namespace donorplan
