#pragma once

#include <cstdint>

#include "donorplan/core_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/forecast.hpp"
#include "donorplan/geo.hpp"

namespace donorplan {

struct BoundingBox {
  double lat_min = 38.55;
  double lat_max = 38.95;
  double lon_min = -9.45;
  double lon_max = -8.95;
};

struct GenSpec {
  int n_donors = 2000;
  int n_sessions = 40;
  int n_sites = 25;  // session locations cluster at the sites
  int n_postal_codes = 600;
  Date as_of = make_date(2020, 1, 1);
  int horizon_months = 12;  // sessions start in [as_of, as_of + horizon)
  int history_years = 3;    // donation histories reach back this far
  int panel_years = 12;     // demand and first-time history before as_of
  GroupValues blood_shares = first_time_donor_shares();
  double share_active = 0.20;
  double share_lapsing = 0.15;  // the rest is inactive
  double adverse_rate = 0.03;
  double suspension_rate = 0.02;
  BoundingBox box;
  // Mean monthly donation-equivalent demand per 1,000 donors.
  double demand_per_thousand = 45.0;
  double demand_trend = 0.0;       // relative change per year
  double demand_noise = 0.05;      // relative standard deviation
  double session_capacity = 40.0;  // mean, expected-attendance units
  double first_time_per_thousand = 3.0;  // monthly first-time donors per 1,000 donors
  // Realised donations of active and lapsing donors at sessions of their
  // nearest site during the first observed_months of the horizon; each
  // eligible session is attended with probability p * observed_attendance.
  // registry.as_of then moves to the end of the observed period.
  int observed_months = 0;
  double observed_attendance = 0.5;
  std::uint64_t seed = 1;

  // Throws InvalidInput.
  void validate() const;
};

struct GeneratedData {
  Registry registry;
  DemandPanel panel;
  MonthlySeries first_time;
  PostalCodeTable postal_codes;
  std::map<std::string, std::string> site_postal_codes;  // site id -> postal code

  friend bool operator==(const GeneratedData&, const GeneratedData&) = default;
};

// Deterministic for a fixed spec. Histories keep >= 60 days between donations
// and respect the annual limits; sessions span at most 14 days; demand has a
// calendar-month seasonal profile, the configured trend and noise; the demand
// panel covers panel_years before as_of through the end of the horizon.
GeneratedData generate(const GenSpec& spec);

}  // namespace donorplan
