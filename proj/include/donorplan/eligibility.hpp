#pragma once

#include <map>
#include <string>
#include <vector>

#include "donorplan/core_model.hpp"

namespace donorplan {

struct EligibilityConfig {
  double radius_km = 3.0;
  int min_gap_days = 60;
  int min_age = 18;

  // Throws InvalidInput.
  void validate() const;
};

// An admissible (donor, session) edge.
struct FeasiblePair {
  std::size_t donor_index = 0;    // into Registry::donors
  std::size_t session_index = 0;  // into Registry::sessions
  std::string donor_id;
  std::string session_id;
  double distance_km = 0.0;
  PlanningMonth month;
  BloodGroup blood_group;
  double donor_probability = 1.0;
  bool adverse = false;

  DemandClass demand_class() const { return {month, blood_group}; }
};

// Pairs sorted by (month, group, session id, donor id), with per-class views.
struct FeasiblePairSet {
  std::vector<FeasiblePair> pairs;
  std::map<DemandClass, std::vector<std::size_t>> by_class;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// True iff (i) min_age <= age at session start <= max eligible age, (ii) the
// session start is outside every (closed) suspension interval, (iii) the
// earliest admissible date is at least min_gap_days after the most recent
// historical donation, and (iv) the anchor distance is within the radius.
// Throws MissingAnchor when the donor has no anchor.
bool static_checks(const Donor& donor, const SessionWindow& session,
                   const EligibilityConfig& cfg);

// Anchorless donors are skipped (they are rejected at ingestion).
FeasiblePairSet build_feasible_pairs(const Registry& registry, const EligibilityConfig& cfg);

// Whether two session windows of one donor are too close for both to be
// attended: with a the earlier-starting window, b.start - a.end < min_gap.
// Windows that start on the same day always conflict.
bool windows_conflict(const SessionWindow& a, const SessionWindow& b, int min_gap_days);

}  // namespace donorplan
