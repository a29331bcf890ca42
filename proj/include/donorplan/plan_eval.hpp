#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "donorplan/bilp_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/eligibility.hpp"
#include "donorplan/plan.hpp"

namespace donorplan {

enum class ViolationFamily : std::uint8_t {
  Capacity,
  Gap,
  AnnualLimit,
  InviteCap,
  Age,
  Suspension,
  Radius,
  HistoryGap,
  PlannedDate,
  Duplicate,
  Demand,
};

std::string_view to_string(ViolationFamily f);

struct Violation {
  ViolationFamily family = ViolationFamily::Capacity;
  std::string subject;  // donor and/or session ids, or the demand class
  double amount = 0.0;  // by how much the rule is broken
  std::string detail;

  std::string str() const;
};

struct ValidationConfig {
  EligibilityConfig eligibility;
  std::optional<int> invite_cap;
  // Demand is a hard requirement only for hard-mode exact plans; greedy and
  // soft plans may leave it unmet.
  bool check_demand = false;
  double tolerance = 1e-9;
};

// Re-derives every constraint family from the registry and the plan rows
// alone. Capacity is registry.sessions[j].capacity. Two invitations of one
// donor conflict when some admissible date of one is within min_gap days of
// some admissible date of the other; history gaps are measured the same way.
// Annual limit: for each invited session, invited sessions of that donor
// ending in the 365 days up to its end date plus historical donations in that
// window must not exceed the limit. A pair listed more than once is reported
// as a duplicate and the repeats are ignored by the other rules. Throws
// InvalidInput on unknown ids.
std::vector<Violation> validate_plan(const InvitationPlan& plan, const Registry& registry,
                                     const DemandTargets& targets, const ValidationConfig& cfg);

struct PlanMetrics {
  double fulfillment_rate = 1.0;
  int adverse_invited = 0;
  double avg_distance_km = 0.0;
  double avg_invites_per_non_hf = 0.0;
  double runtime_s = 0.0;
  std::optional<double> peak_memory_mb;
  int invitations = 0;
};

// Fulfillment: sum over classes of min(fulfilled, residual) / sum of residuals
// (1.0 when there is no residual demand); fulfilled is recomputed from the
// invitations and registry probabilities. Adverse donors are counted once.
PlanMetrics compute_metrics(const InvitationPlan& plan, const Registry& registry,
                            const DemandTargets& targets);

// Expected donations per class from the invitations.
std::map<DemandClass, double> fulfilled_by_class(const InvitationPlan& plan,
                                                 const Registry& registry);

// Objective terms of the model evaluated on the plan, with minimal multi-invite
// indicators and slacks.
ObjectiveBreakdown plan_objective(const InvitationPlan& plan, const Registry& registry,
                                  const DemandTargets& targets, const ModelConfig& cfg);

// Wall time and peak resident memory between start() and stop(). Peak memory
// uses the kernel's high-water mark, reset at start(); unset when the reset or
// the read is not possible.
class ResourceMeter {
 public:
  void start();
  ResourceUsage stop() const;

 private:
  std::chrono::steady_clock::time_point started_{};
  bool peak_reset_ = false;
};

}  // namespace donorplan
