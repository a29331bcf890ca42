#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "donorplan/geo_point.hpp"

namespace donorplan {

// ---------------------------------------------------------------------------
// Calendar
// ---------------------------------------------------------------------------

using Date = std::chrono::sys_days;

Date make_date(int year, unsigned month, unsigned day);

// Parses YYYY-MM-DD. Throws InvalidInput on anything else, including
// calendar-invalid dates such as 2021-02-29.
Date parse_date(std::string_view iso);

std::string format_date(Date d);

// Signed day count b - a.
inline int days_between(Date a, Date b) { return static_cast<int>((b - a).count()); }

inline constexpr int kRollingYearDays = 365;

struct PlanningMonth {
  int year = 1970;
  unsigned month = 1;  // 1..12

  static PlanningMonth of(Date d);
  // Throws InvalidInput on month outside 1..12.
  static PlanningMonth make(int year, unsigned month);

  Date first_day() const;
  Date last_day() const;
  PlanningMonth plus(int months) const;
  // Months from this to other (other - this).
  int months_until(const PlanningMonth& other) const;
  std::string str() const;  // "2020-03"
  std::string compact() const;  // "202003"

  friend auto operator<=>(const PlanningMonth&, const PlanningMonth&) = default;
};

// ---------------------------------------------------------------------------
// Blood groups
// ---------------------------------------------------------------------------

enum class Abo : std::uint8_t { A, B, AB, O };
enum class Rh : std::uint8_t { Positive, Negative };

inline constexpr int kBloodGroupCount = 8;

// ABO/Rh group. Canonical order (index 0..7): A+, A-, B+, B-, AB+, AB-, O+, O-.
class BloodGroup {
 public:
  constexpr BloodGroup() = default;
  constexpr BloodGroup(Abo abo, Rh rh) : abo_(abo), rh_(rh) {}

  constexpr Abo abo() const { return abo_; }
  constexpr Rh rh() const { return rh_; }
  constexpr int index() const {
    return static_cast<int>(abo_) * 2 + (rh_ == Rh::Negative ? 1 : 0);
  }

  static BloodGroup from_index(int index);
  // Accepts "A+", "AB-", and the typographic minus U+2212.
  static BloodGroup parse(std::string_view text);
  std::string name() const;

  friend constexpr bool operator==(const BloodGroup& a, const BloodGroup& b) {
    return a.index() == b.index();
  }
  friend constexpr auto operator<=>(const BloodGroup& a, const BloodGroup& b) {
    return a.index() <=> b.index();
  }

 private:
  Abo abo_ = Abo::A;
  Rh rh_ = Rh::Positive;
};

const std::array<BloodGroup, kBloodGroupCount>& all_blood_groups();

// Per-group scalar, indexed by BloodGroup::index().
using GroupValues = std::array<double, kBloodGroupCount>;

// (month, blood group) demand class. Ordered by month, then canonical group.
struct DemandClass {
  PlanningMonth month;
  BloodGroup group;

  std::string str() const;
  friend auto operator<=>(const DemandClass&, const DemandClass&) = default;
};

// ---------------------------------------------------------------------------
// Registry entities
// ---------------------------------------------------------------------------

enum class Sex : std::uint8_t { Male, Female };

std::string_view to_string(Sex s);
Sex parse_sex(std::string_view text);

// Closed interval [first, last].
struct DateInterval {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  friend bool operator==(const DateInterval&, const DateInterval&) = default;
};

struct Donation {
  Date date;
  std::string site_id;  // empty when the collection site is unknown

  friend bool operator==(const Donation&, const Donation&) = default;
};

struct Donor {
  std::string id;
  Sex sex = Sex::Male;
  Date birth_date{};
  int max_eligible_age = 65;
  BloodGroup blood_group;
  double attendance_probability = 1.0;
  bool adverse_reaction = false;
  std::vector<DateInterval> suspensions;
  std::vector<Donation> donations;  // strictly increasing dates
  std::string home_postal_code;
  std::optional<GeoPoint> home_anchor;
  std::optional<GeoPoint> last_brigade_anchor;
  std::vector<Date> invitations_sent;  // sorted

  bool has_anchor() const { return home_anchor || last_brigade_anchor; }
  std::optional<Date> last_donation() const;

  friend bool operator==(const Donor&, const Donor&) = default;
};

struct SessionWindow {
  std::string id;
  std::string site_id;
  GeoPoint location;
  Date start_date{};
  Date end_date{};
  std::vector<Date> admissible_dates;  // nonempty, sorted, within [start, end]
  double capacity = 0.0;               // expected-attendance units

  PlanningMonth month() const { return PlanningMonth::of(start_date); }
  Date earliest_admissible() const { return admissible_dates.front(); }
  Date latest_admissible() const { return admissible_dates.back(); }

  friend bool operator==(const SessionWindow&, const SessionWindow&) = default;
};

inline constexpr int kMaxSessionWindowDays = 14;

struct Registry {
  std::vector<Donor> donors;
  std::vector<SessionWindow> sessions;
  // Known collection-site coordinates, including sites with no session in the
  // current schedule.
  std::map<std::string, GeoPoint> site_locations;
  Date as_of{};

  // Throws InvalidInput naming the first broken invariant.
  void validate() const;

  friend bool operator==(const Registry&, const Registry&) = default;
};

// Id -> position lookup over a registry that must outlive the index.
class RegistryIndex {
 public:
  explicit RegistryIndex(const Registry& registry);

  std::optional<std::size_t> donor(std::string_view id) const;
  std::optional<std::size_t> session(std::string_view id) const;

 private:
  std::unordered_map<std::string, std::size_t> donors_;
  std::unordered_map<std::string, std::size_t> sessions_;
};

// Throws InvalidInput describing the violated invariant.
void validate_donor(const Donor& donor);
void validate_session(const SessionWindow& session);

// ---------------------------------------------------------------------------
// Donor rules
// ---------------------------------------------------------------------------

// Whole years, incrementing on the birthday itself. Feb-29 birthdays advance
// on Mar-1 in non-leap years.
int age_at(const Donor& donor, Date date);

// Donations in the 365 days up to and including t, i.e. in (t - 365, t].
int historical_donations(const Donor& donor, Date t);

// >= 3 donations in (as_of - 365, as_of] for men, >= 2 for women.
bool is_high_frequency(const Donor& donor, Date as_of);

// Maximum donations in any 365-day window: 4 for men, 3 for women.
int annual_limit(const Donor& donor);

// Invitations in (as_of - 365, as_of].
int invitations_in_window(const Donor& donor, Date as_of);

}  // namespace donorplan
