#include "donorplan/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

namespace ch = std::chrono;

Date make_date(int year, unsigned month, unsigned day) {
  const ch::year_month_day ymd{ch::year{year}, ch::month{month}, ch::day{day}};
  if (!ymd.ok()) {
    throw InvalidInput(fmt::format("invalid calendar date {}-{}-{}", year, month, day));
  }
  return Date{ymd};
}

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view iso) {
  unsigned y = 0, m = 0, d = 0;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !parse_uint(iso.substr(0, 4), y) ||
      !parse_uint(iso.substr(5, 2), m) || !parse_uint(iso.substr(8, 2), d)) {
    throw InvalidInput(fmt::format("malformed date '{}' (expected YYYY-MM-DD)", iso));
  }
  return make_date(static_cast<int>(y), m, d);
}

std::string format_date(Date d) {
  const ch::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

// --- PlanningMonth ---------------------------------------------------------

PlanningMonth PlanningMonth::of(Date d) {
  const ch::year_month_day ymd{d};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month())};
}

PlanningMonth PlanningMonth::make(int year, unsigned month) {
  if (month < 1 || month > 12) {
    throw InvalidInput(fmt::format("month {} outside 1..12", month));
  }
  return {year, month};
}

Date PlanningMonth::first_day() const { return make_date(year, month, 1); }

Date PlanningMonth::last_day() const {
  const ch::year_month_day_last ymdl{ch::year{year}, ch::month_day_last{ch::month{month}}};
  return Date{ymdl};
}

PlanningMonth PlanningMonth::plus(int months) const {
  const int total = year * 12 + static_cast<int>(month) - 1 + months;
  const int y = total >= 0 ? total / 12 : (total - 11) / 12;
  return {y, static_cast<unsigned>(total - y * 12 + 1)};
}

int PlanningMonth::months_until(const PlanningMonth& other) const {
  return (other.year - year) * 12 + static_cast<int>(other.month) - static_cast<int>(month);
}

std::string PlanningMonth::str() const { return fmt::format("{:04d}-{:02d}", year, month); }
std::string PlanningMonth::compact() const { return fmt::format("{:04d}{:02d}", year, month); }

// --- BloodGroup ------------------------------------------------------------

BloodGroup BloodGroup::from_index(int index) {
  if (index < 0 || index >= kBloodGroupCount) {
    throw InvalidInput(fmt::format("blood group index {} out of range", index));
  }
  return {static_cast<Abo>(index / 2), index % 2 == 0 ? Rh::Positive : Rh::Negative};
}

BloodGroup BloodGroup::parse(std::string_view text) {
  std::string_view abo_part;
  Rh rh;
  if (text.ends_with('+')) {
    abo_part = text.substr(0, text.size() - 1);
    rh = Rh::Positive;
  } else if (text.ends_with('-')) {
    abo_part = text.substr(0, text.size() - 1);
    rh = Rh::Negative;
  } else if (text.ends_with("−")) {
    abo_part = text.substr(0, text.size() - 3);
    rh = Rh::Negative;
  } else {
    throw InvalidInput(fmt::format("unknown blood group '{}'", text));
  }
  Abo abo;
  if (abo_part == "A") {
    abo = Abo::A;
  } else if (abo_part == "B") {
    abo = Abo::B;
  } else if (abo_part == "AB") {
    abo = Abo::AB;
  } else if (abo_part == "O") {
    abo = Abo::O;
  } else {
    throw InvalidInput(fmt::format("unknown blood group '{}'", text));
  }
  return {abo, rh};
}

std::string BloodGroup::name() const {
  static constexpr std::array<std::string_view, 4> kAbo{"A", "B", "AB", "O"};
  return fmt::format("{}{}", kAbo[static_cast<int>(abo_)], rh_ == Rh::Positive ? '+' : '-');
}

const std::array<BloodGroup, kBloodGroupCount>& all_blood_groups() {
  static const std::array<BloodGroup, kBloodGroupCount> groups = [] {
    std::array<BloodGroup, kBloodGroupCount> g;
    for (int i = 0; i < kBloodGroupCount; ++i) g[i] = BloodGroup::from_index(i);
    return g;
  }();
  return groups;
}

std::string DemandClass::str() const { return fmt::format("{}/{}", month.str(), group.name()); }

// --- Sex -------------------------------------------------------------------

std::string_view to_string(Sex s) { return s == Sex::Male ? "M" : "F"; }

Sex parse_sex(std::string_view text) {
  if (text == "M" || text == "male") return Sex::Male;
  if (text == "F" || text == "female") return Sex::Female;
  throw InvalidInput(fmt::format("unknown sex '{}'", text));
}

// --- Donor / Session validation ---------------------------------------------

std::optional<Date> Donor::last_donation() const {
  if (donations.empty()) return std::nullopt;
  return donations.back().date;
}

void validate_donor(const Donor& donor) {
  if (donor.id.empty()) throw InvalidInput("donor with empty id");
  if (!(donor.attendance_probability > 0.0 && donor.attendance_probability <= 1.0)) {
    throw InvalidInput(fmt::format("donor {}: attendance probability {} outside (0,1]", donor.id,
                                   donor.attendance_probability));
  }
  if (donor.max_eligible_age < 0) {
    throw InvalidInput(fmt::format("donor {}: negative max eligible age", donor.id));
  }
  for (std::size_t k = 1; k < donor.donations.size(); ++k) {
    if (donor.donations[k].date <= donor.donations[k - 1].date) {
      throw InvalidInput(fmt::format("donor {}: donation history not strictly increasing at {}",
                                     donor.id, format_date(donor.donations[k].date)));
    }
  }
  if (!std::is_sorted(donor.invitations_sent.begin(), donor.invitations_sent.end())) {
    throw InvalidInput(fmt::format("donor {}: invitation dates not sorted", donor.id));
  }
  for (const auto& s : donor.suspensions) {
    if (s.last < s.first) {
      throw InvalidInput(fmt::format("donor {}: suspension ends before it starts", donor.id));
    }
  }
}

void validate_session(const SessionWindow& session) {
  if (session.id.empty()) throw InvalidInput("session with empty id");
  if (session.end_date < session.start_date) {
    throw InvalidInput(fmt::format("session {}: end before start", session.id));
  }
  if (days_between(session.start_date, session.end_date) > kMaxSessionWindowDays) {
    throw InvalidInput(fmt::format("session {}: window longer than {} days", session.id,
                                   kMaxSessionWindowDays));
  }
  if (session.admissible_dates.empty()) {
    throw InvalidInput(fmt::format("session {}: no admissible dates", session.id));
  }
  for (std::size_t k = 0; k < session.admissible_dates.size(); ++k) {
    const Date d = session.admissible_dates[k];
    if (d < session.start_date || d > session.end_date) {
      throw InvalidInput(fmt::format("session {}: admissible date {} outside window", session.id,
                                     format_date(d)));
    }
    if (k > 0 && d <= session.admissible_dates[k - 1]) {
      throw InvalidInput(fmt::format("session {}: admissible dates not sorted", session.id));
    }
  }
  if (!(session.capacity >= 0.0)) {
    throw InvalidInput(fmt::format("session {}: negative capacity", session.id));
  }
}

void Registry::validate() const {
  std::set<std::string_view> ids;
  for (const auto& d : donors) {
    validate_donor(d);
    if (!ids.insert(d.id).second) throw InvalidInput(fmt::format("duplicate donor id {}", d.id));
    if (!d.donations.empty() && d.donations.back().date > as_of) {
      throw InvalidInput(fmt::format("donor {}: donation after as-of date", d.id));
    }
  }
  ids.clear();
  for (const auto& s : sessions) {
    validate_session(s);
    if (!ids.insert(s.id).second) throw InvalidInput(fmt::format("duplicate session id {}", s.id));
  }
}

RegistryIndex::RegistryIndex(const Registry& registry) {
  donors_.reserve(registry.donors.size());
  for (std::size_t i = 0; i < registry.donors.size(); ++i) donors_.emplace(registry.donors[i].id, i);
  for (std::size_t j = 0; j < registry.sessions.size(); ++j) {
    sessions_.emplace(registry.sessions[j].id, j);
  }
}

std::optional<std::size_t> RegistryIndex::donor(std::string_view id) const {
  auto it = donors_.find(std::string(id));
  if (it == donors_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> RegistryIndex::session(std::string_view id) const {
  auto it = sessions_.find(std::string(id));
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

// --- Donor rules --------------------------------------------------------------

int age_at(const Donor& donor, Date date) {
  if (date < donor.birth_date) {
    throw InvalidInput(fmt::format("donor {}: date {} precedes birth date", donor.id,
                                   format_date(date)));
  }
  const ch::year_month_day b{donor.birth_date};
  const ch::year_month_day d{date};
  int years = static_cast<int>(d.year()) - static_cast<int>(b.year());
  if (ch::month_day{d.month(), d.day()} < ch::month_day{b.month(), b.day()}) --years;
  return years;
}

int historical_donations(const Donor& donor, Date t) {
  const Date lo = t - ch::days{kRollingYearDays};
  int n = 0;
  for (const auto& don : donor.donations) {
    if (don.date > lo && don.date <= t) ++n;
  }
  return n;
}

bool is_high_frequency(const Donor& donor, Date as_of) {
  const int threshold = donor.sex == Sex::Male ? 3 : 2;
  return historical_donations(donor, as_of) >= threshold;
}

int annual_limit(const Donor& donor) { return donor.sex == Sex::Male ? 4 : 3; }

int invitations_in_window(const Donor& donor, Date as_of) {
  const Date lo = as_of - ch::days{kRollingYearDays};
  return static_cast<int>(std::count_if(donor.invitations_sent.begin(),
                                        donor.invitations_sent.end(),
                                        [&](Date d) { return d > lo && d <= as_of; }));
}

}  // namespace donorplan
