#include "donorplan/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

GeoPoint make_geo_point(double lat, double lon) {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0)) {
    throw InvalidInput(fmt::format("coordinates ({}, {}) out of bounds", lat, lon));
  }
  return {lat, lon};
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kDegToRad = std::numbers::pi / 180.0;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s_phi = std::sin(dphi / 2.0);
  const double s_lambda = std::sin(dlambda / 2.0);
  // Exactly symmetric in (a, b): sin^2 is even and the cosine product commutes.
  const double h = s_phi * s_phi +
                   std::cos(a.lat * kDegToRad) * std::cos(b.lat * kDegToRad) * s_lambda * s_lambda;
  const double c = 2.0 * std::asin(std::sqrt(std::clamp(h, 0.0, 1.0)));
  return kEarthRadiusKm * c;
}

double donor_session_distance(const Donor& donor, const SessionWindow& session) {
  if (!donor.has_anchor()) {
    throw MissingAnchor(fmt::format("donor {} has no geographic anchor", donor.id));
  }
  double best = std::numeric_limits<double>::infinity();
  if (donor.home_anchor) best = std::min(best, haversine_km(*donor.home_anchor, session.location));
  if (donor.last_brigade_anchor) {
    best = std::min(best, haversine_km(*donor.last_brigade_anchor, session.location));
  }
  return best;
}

void PostalCodeTable::insert(std::string code, GeoPoint point) {
  if (code.empty()) throw InvalidInput("empty postal code");
  point = make_geo_point(point.lat, point.lon);
  auto [it, inserted] = entries_.emplace(std::move(code), point);
  if (!inserted) throw InvalidInput(fmt::format("duplicate postal code {}", it->first));
}

std::optional<GeoPoint> PostalCodeTable::find(std::string_view code) const {
  auto it = entries_.find(code);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

}  // namespace donorplan
