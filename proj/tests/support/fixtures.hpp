#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "donorplan/bilp_model.hpp"
#include "donorplan/core_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/eligibility.hpp"

namespace donorplan::testing {

inline constexpr GeoPoint kLisbon{38.7223, -9.1393};

// Point offset from `origin` by the given kilometres north and east.
GeoPoint offset_km(GeoPoint origin, double north_km, double east_km);

Donor make_donor(std::string id, Sex sex, Date birth, BloodGroup group, double p,
                 GeoPoint home);

// Every day from start to end is admissible.
SessionWindow make_session(std::string id, std::string site, GeoPoint where, Date start, Date end,
                           double capacity);

struct SmallInstance {
  Registry registry;
  FeasiblePairSet pairs;
  DemandTargets targets;
  ModelConfig model_cfg;
  EligibilityConfig eligibility;
};

struct SmallInstanceOptions {
  std::size_t max_pairs = 16;
  bool integer_distances = false;
  // -1 picks at random per instance.
  int soft_mode = -1;
  int invite_cap = -1;
};

// Random desk-sized instance with histories that exercise the gap, annual
// limit and invitation cap rules. Probabilities are multiples of 0.25.
SmallInstance random_small_instance(std::uint64_t seed, const SmallInstanceOptions& opt = {});

}  // namespace donorplan::testing
