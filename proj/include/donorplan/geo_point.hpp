#pragma once

namespace donorplan {

// Decimal degrees. Construct through make_geo_point() to get bounds checking.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Throws InvalidInput when lat is outside [-90, 90] or lon outside [-180, 180].
GeoPoint make_geo_point(double lat, double lon);

}  // namespace donorplan
