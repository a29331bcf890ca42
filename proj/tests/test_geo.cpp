#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "donorplan/errors.hpp"
#include "donorplan/geo.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace donorplan {
namespace {

TEST(Haversine, MatchesChordFormulaOnRandomPairs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int k = 0; k < 1000; ++k) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    const double expected = testing::chord_distance_km(a, b);
    EXPECT_NEAR(haversine_km(a, b), expected, 1e-6 * expected) << k;
    EXPECT_EQ(haversine_km(a, b), haversine_km(b, a));
    EXPECT_EQ(haversine_km(a, a), 0.0);
  }
}

TEST(Haversine, OneDegreeOfLatitude) {
  // R * pi / 180.
  EXPECT_NEAR(haversine_km({0.0, 0.0}, {1.0, 0.0}), 111.19492664455873, 1e-9);
}

TEST(GeoPoint, BoundsAreChecked) {
  EXPECT_NO_THROW(make_geo_point(90.0, -180.0));
  EXPECT_THROW(make_geo_point(90.5, 0.0), InvalidInput);
  EXPECT_THROW(make_geo_point(0.0, 181.0), InvalidInput);
}

TEST(DonorSessionDistance, UsesTheCloserAnchor) {
  using testing::kLisbon;
  auto d = testing::make_donor("d", Sex::Male, make_date(1980, 1, 1), BloodGroup{}, 0.5,
                               testing::offset_km(kLisbon, 5.0, 0.0));
  const auto s = testing::make_session("S", "x", kLisbon, make_date(2020, 1, 2),
                                       make_date(2020, 1, 3), 1.0);
  EXPECT_NEAR(donor_session_distance(d, s), 5.0, 1e-9);
  d.last_brigade_anchor = testing::offset_km(kLisbon, 0.0, 2.0);
  // An east offset follows a parallel, slightly longer than the great circle.
  EXPECT_NEAR(donor_session_distance(d, s), 2.0, 1e-7);
  d.home_anchor.reset();
  d.last_brigade_anchor.reset();
  EXPECT_THROW(donor_session_distance(d, s), MissingAnchor);
}

TEST(PostalCodeTable, LookupAndDuplicates) {
  PostalCodeTable t;
  t.insert("1000-001", {38.7, -9.1});
  EXPECT_EQ(t.find("1000-001"), (GeoPoint{38.7, -9.1}));
  EXPECT_FALSE(t.find("1000-002").has_value());
  EXPECT_THROW(t.insert("1000-001", {0.0, 0.0}), InvalidInput);
  EXPECT_EQ(t.size(), 1u);
}

}  // namespace
}  // namespace donorplan
