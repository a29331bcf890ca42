#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "donorplan/core_model.hpp"
#include "donorplan/geo_point.hpp"

namespace donorplan {

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Minimum haversine distance from either donor anchor to the session.
// Throws MissingAnchor when the donor has neither anchor.
double donor_session_distance(const Donor& donor, const SessionWindow& session);

// Postal code -> coordinates. Lookup only.
class PostalCodeTable {
 public:
  // Throws InvalidInput on a duplicate key.
  void insert(std::string code, GeoPoint point);
  std::optional<GeoPoint> find(std::string_view code) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, GeoPoint, std::less<>>& entries() const { return entries_; }

  friend bool operator==(const PostalCodeTable&, const PostalCodeTable&) = default;

 private:
  std::map<std::string, GeoPoint, std::less<>> entries_;
};

}  // namespace donorplan
