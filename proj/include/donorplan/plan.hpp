#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "donorplan/core_model.hpp"

namespace donorplan {

struct PlannedInvitation {
  std::string donor_id;
  std::string session_id;
  Date planned_date{};
  Date invited_on{};  // when the invitation goes out
  double distance_km = 0.0;
  double probability = 0.0;
  bool adverse = false;

  friend bool operator==(const PlannedInvitation&, const PlannedInvitation&) = default;
};

struct ObjectiveBreakdown {
  double distance = 0.0;
  double invite_penalty = 0.0;
  double adverse = 0.0;
  double slack = 0.0;

  double total() const { return distance + invite_penalty + adverse + slack; }
  friend bool operator==(const ObjectiveBreakdown&, const ObjectiveBreakdown&) = default;
};

struct ResourceUsage {
  double wall_seconds = 0.0;
  std::optional<double> peak_memory_mb;  // unset when the platform cannot measure it
};

struct InvitationPlan {
  std::string solver;
  std::string status;  // optimal, feasible, infeasible, time_limit, node_limit
  std::vector<PlannedInvitation> invitations;  // sorted by (donor id, planned date, session id)
  std::map<DemandClass, double> fulfilled;     // expected donations per class
  std::map<DemandClass, double> slack;         // soft mode
  ObjectiveBreakdown objective;
  ResourceUsage resources;

  void sort();
};

}  // namespace donorplan
