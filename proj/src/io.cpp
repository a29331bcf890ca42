#include "donorplan/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

namespace fs = std::filesystem;

// --- CSV ----------------------------------------------------------------------

CsvTable parse_csv(std::string_view text, std::string_view source) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1, column = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool quoted_field = false;  // field opened with a quote and it has closed
  bool record_has_content = false;

  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    quoted_field = false;
    const bool blank = !record_has_content && record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty() && table.rows.empty()) {
        table.header = std::move(record);
      } else {
        table.rows.push_back({record_line, std::move(record)});
      }
    }
    record.clear();
    record_has_content = false;
  };

  std::size_t quote_line = 0, quote_column = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
          column += 2;
          continue;
        }
        in_quotes = false;
        quoted_field = true;
      } else {
        field.push_back(c);
        if (c == '\n') {
          ++line;
          column = 0;
        }
      }
      ++column;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || quoted_field) {
        throw ParseError(std::string(source), line, column, "quote inside unquoted field");
      }
      in_quotes = true;
      record_has_content = true;
      quote_line = line;
      quote_column = column;
      ++column;
      continue;
    }
    if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      quoted_field = false;
      record_has_content = true;
      ++column;
      continue;
    }
    if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    if (c == '\n') {
      end_record();
      ++line;
      column = 1;
      record_line = line;
      continue;
    }
    if (quoted_field) {
      throw ParseError(std::string(source), line, column, "text after closing quote");
    }
    field.push_back(c);
    record_has_content = true;
    ++column;
  }
  if (in_quotes) {
    throw ParseError(std::string(source), quote_line, quote_column, "unterminated quoted field");
  }
  if (record_has_content || !field.empty()) end_record();
  return table;
}

void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    std::string_view source) {
  if (table.header.empty()) throw ParseError(std::string(source), 1, 1, "missing header");
  std::size_t column = 1;
  for (std::size_t k = 0; k < std::max(table.header.size(), expected.size()); ++k) {
    const std::string got = k < table.header.size() ? table.header[k] : "<none>";
    const std::string want = k < expected.size() ? expected[k] : "<none>";
    if (got != want) {
      throw ParseError(std::string(source), 1, column,
                       fmt::format("header column {} is '{}', expected '{}'", k + 1, got, want));
    }
    column += got.size() + 1;
  }
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k > 0) out.push_back(',');
    out += csv_field(fields[k]);
  }
  out.push_back('\n');
  return out;
}

// --- Files and checksums ------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &size, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string out;
  out.reserve(2 * size);
  for (unsigned int k = 0; k < size; ++k) out += fmt::format("{:02x}", digest[k]);
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput(fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InvalidInput(fmt::format("write failed for {}", path.string()));
}

// --- Field parsing ------------------------------------------------------------

namespace {

// Row-level failure; becomes a rejection.
struct RowError {
  std::string reason;
};

double to_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw RowError{fmt::format("{} '{}' is not a number", what, text)};
  }
  return v;
}

int to_int(std::string_view text, std::string_view what) {
  int v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw RowError{fmt::format("{} '{}' is not an integer", what, text)};
  }
  return v;
}

bool to_bool(std::string_view text, std::string_view what) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw RowError{fmt::format("{} '{}' is not 0/1", what, text)};
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidInput& e) {
    throw RowError{e.what()};
  }
}

Date to_date(std::string_view text, std::string_view what) {
  try {
    return parse_date(text);
  } catch (const InvalidInput&) {
    throw RowError{fmt::format("{} '{}' is not a YYYY-MM-DD date", what, text)};
  }
}

std::string number(double v) { return fmt::format("{}", v); }

const std::map<std::string_view, std::vector<std::string>>& headers() {
  static const std::map<std::string_view, std::vector<std::string>> h{
      {files::kDonors,
       {"donor_id", "sex", "birth_date", "max_eligible_age", "blood_group",
        "attendance_probability", "adverse_reaction", "home_postal_code"}},
      {files::kDonations, {"donor_id", "date", "site_id"}},
      {files::kSuspensions, {"donor_id", "start_date", "end_date"}},
      {files::kInvitations, {"donor_id", "date"}},
      {files::kSessions,
       {"session_id", "site_id", "lat", "lon", "start_date", "end_date", "admissible_dates",
        "capacity"}},
      {files::kSites, {"site_id", "postal_code"}},
      {files::kDemandPanel, {"year", "month", "blood_group", "component", "units"}},
      {files::kFirstTime, {"year", "month", "count"}},
      {files::kPostalCodes, {"postal_code", "lat", "lon"}},
      {files::kPlan,
       {"window", "donor_id", "session_id", "planned_date", "invited_on", "distance_km",
        "probability", "adverse"}},
  };
  return h;
}

// One dataset file being read.
class Reader {
 public:
  Reader(const fs::path& dir, std::string_view name, bool required, IngestionReport& report)
      : name_(name), report_(report) {
    const fs::path path = dir / name;
    if (!fs::exists(path)) {
      if (required) throw ParseError(std::string(name), 0, 0, "required file is missing");
      return;
    }
    std::string text;
    try {
      text = read_file(path);
    } catch (const InvalidInput& e) {
      throw ParseError(std::string(name), 0, 0, e.what());
    }
    report_.checksums[std::string(name)] = sha256_hex(text);
    table_ = parse_csv(text, name);
    require_header(table_, dataset_header(name), name);
    present_ = true;
    report_.counts[std::string(name)];
  }

  bool present() const { return present_; }

  // Calls f(fields) per row; f throws RowError to reject the row.
  template <class F>
  void each(F&& f) {
    const std::size_t width = table_.header.size();
    for (const auto& row : table_.rows) {
      try {
        if (row.fields.size() != width) {
          throw RowError{fmt::format("expected {} fields, found {}", width, row.fields.size())};
        }
        f(row.fields);
        accept();
      } catch (const RowError& e) {
        reject(row.line, e.reason);
      }
    }
  }

  void accept() { ++report_.counts[std::string(name_)].accepted; }
  void reject(std::size_t line, std::string reason) {
    ++report_.counts[std::string(name_)].rejected;
    report_.rejections.push_back({std::string(name_), line, std::move(reason)});
  }

 private:
  std::string_view name_;
  IngestionReport& report_;
  CsvTable table_;
  bool present_ = false;
};

}  // namespace

const std::vector<std::string>& dataset_header(std::string_view file) {
  const auto& h = headers();
  const auto it = h.find(file);
  if (it == h.end()) throw InvalidInput(fmt::format("no schema for '{}'", file));
  return it->second;
}

// --- Ingestion ----------------------------------------------------------------

Ingested ingest(const fs::path& dir, const IngestOptions& opts) {
  Ingested out;
  IngestionReport& report = out.report;
  GeneratedData& data = out.data;
  Registry& reg = data.registry;
  reg.as_of = opts.as_of;

  {
    Reader r(dir, files::kPostalCodes, true, report);
    r.each([&](const auto& f) {
      if (f[0].empty()) throw RowError{"empty postal code"};
      if (data.postal_codes.find(f[0])) throw RowError{fmt::format("duplicate postal code {}", f[0])};
      const double lat = to_double(f[1], "lat"), lon = to_double(f[2], "lon");
      data.postal_codes.insert(f[0], guarded([&] { return make_geo_point(lat, lon); }));
    });
  }

  {
    Reader r(dir, files::kSites, false, report);
    r.each([&](const auto& f) {
      if (f[0].empty()) throw RowError{"empty site id"};
      if (data.site_postal_codes.count(f[0])) throw RowError{fmt::format("duplicate site {}", f[0])};
      const auto point = data.postal_codes.find(f[1]);
      if (!point) throw RowError{fmt::format("unknown postal code {}", f[1])};
      data.site_postal_codes[f[0]] = f[1];
      reg.site_locations[f[0]] = *point;
    });
  }

  std::unordered_map<std::string, std::size_t> donor_at;
  {
    Reader r(dir, files::kDonors, true, report);
    r.each([&](const auto& f) {
      Donor d;
      d.id = f[0];
      if (d.id.empty()) throw RowError{"empty donor id"};
      if (donor_at.count(d.id)) throw RowError{fmt::format("duplicate donor id {}", d.id)};
      d.sex = guarded([&] { return parse_sex(f[1]); });
      d.birth_date = to_date(f[2], "birth_date");
      d.max_eligible_age = to_int(f[3], "max_eligible_age");
      d.blood_group = guarded([&] { return BloodGroup::parse(f[4]); });
      d.attendance_probability = to_double(f[5], "attendance_probability");
      d.adverse_reaction = to_bool(f[6], "adverse_reaction");
      d.home_postal_code = f[7];
      guarded([&] { validate_donor(d); });
      if (!d.home_postal_code.empty()) {
        d.home_anchor = data.postal_codes.find(d.home_postal_code);
        if (!d.home_anchor) {
          report.warnings.push_back(
              fmt::format("donor {}: postal code {} not in the postal table", d.id, d.home_postal_code));
        }
      }
      donor_at.emplace(d.id, reg.donors.size());
      reg.donors.push_back(std::move(d));
    });
  }
  auto donor_of = [&](const std::string& id) -> Donor& {
    const auto it = donor_at.find(id);
    if (it == donor_at.end()) throw RowError{fmt::format("unknown donor {}", id)};
    return reg.donors[it->second];
  };

  {
    Reader r(dir, files::kDonations, false, report);
    std::set<std::pair<std::size_t, Date>> seen;
    r.each([&](const auto& f) {
      Donor& d = donor_of(f[0]);
      const Date date = to_date(f[1], "date");
      if (reg.as_of != Date{} && date > reg.as_of) {
        throw RowError{fmt::format("donation on {} is after the as-of date", f[1])};
      }
      const std::size_t idx = donor_at.at(d.id);
      if (!seen.emplace(idx, date).second) {
        throw RowError{fmt::format("donor {} already has a donation on {}", d.id, f[1])};
      }
      d.donations.push_back({date, f[2]});
    });
    for (auto& d : reg.donors) {
      std::stable_sort(d.donations.begin(), d.donations.end(),
                       [](const Donation& a, const Donation& b) { return a.date < b.date; });
    }
  }

  {
    Reader r(dir, files::kSuspensions, false, report);
    r.each([&](const auto& f) {
      Donor& d = donor_of(f[0]);
      const DateInterval iv{to_date(f[1], "start_date"), to_date(f[2], "end_date")};
      if (iv.last < iv.first) throw RowError{"suspension ends before it starts"};
      d.suspensions.push_back(iv);
    });
  }

  {
    Reader r(dir, files::kInvitations, false, report);
    r.each([&](const auto& f) { donor_of(f[0]).invitations_sent.push_back(to_date(f[1], "date")); });
    for (auto& d : reg.donors) std::sort(d.invitations_sent.begin(), d.invitations_sent.end());
  }

  {
    Reader r(dir, files::kSessions, true, report);
    std::set<std::string> ids;
    r.each([&](const auto& f) {
      SessionWindow s;
      s.id = f[0];
      if (ids.count(s.id)) throw RowError{fmt::format("duplicate session id {}", s.id)};
      s.site_id = f[1];
      const double lat = to_double(f[2], "lat"), lon = to_double(f[3], "lon");
      s.location = guarded([&] { return make_geo_point(lat, lon); });
      s.start_date = to_date(f[4], "start_date");
      s.end_date = to_date(f[5], "end_date");
      std::string_view list = f[6];
      while (!list.empty()) {
        const auto cut = list.find(';');
        s.admissible_dates.push_back(to_date(list.substr(0, cut), "admissible date"));
        if (cut == std::string_view::npos) break;
        list.remove_prefix(cut + 1);
      }
      s.capacity = to_double(f[7], "capacity");
      guarded([&] { validate_session(s); });
      ids.insert(s.id);
      if (!s.site_id.empty() && !reg.site_locations.count(s.site_id)) {
        reg.site_locations[s.site_id] = s.location;
      }
      reg.sessions.push_back(std::move(s));
    });
  }

  for (auto& d : reg.donors) {
    for (auto it = d.donations.rbegin(); it != d.donations.rend(); ++it) {
      const auto site = reg.site_locations.find(it->site_id);
      if (site != reg.site_locations.end()) {
        d.last_brigade_anchor = site->second;
        break;
      }
    }
    if (!d.has_anchor()) report.warnings.push_back(fmt::format("donor {} has no anchor", d.id));
  }

  {
    Reader r(dir, files::kDemandPanel, true, report);
    r.each([&](const auto& f) {
      const PlanningMonth m = guarded([&] {
        return PlanningMonth::make(to_int(f[0], "year"), static_cast<unsigned>(to_int(f[1], "month")));
      });
      const BloodGroup g = guarded([&] { return BloodGroup::parse(f[2]); });
      const Component c = guarded([&] { return parse_component(f[3]); });
      const double units = to_double(f[4], "units");
      if (data.panel.get(m, g, c)) {
        throw RowError{fmt::format("duplicate demand row {} {} {}", m.str(), f[2], f[3])};
      }
      guarded([&] { data.panel.add(m, g, c, units); });
    });
  }

  {
    Reader r(dir, files::kFirstTime, false, report);
    std::vector<std::pair<PlanningMonth, double>> rows;
    r.each([&](const auto& f) {
      const PlanningMonth m = guarded([&] {
        return PlanningMonth::make(to_int(f[0], "year"), static_cast<unsigned>(to_int(f[1], "month")));
      });
      const double v = to_double(f[2], "count");
      if (v < 0.0) throw RowError{"negative count"};
      if (!rows.empty() && m <= rows.back().first) throw RowError{"months not increasing"};
      rows.emplace_back(m, v);
    });
    if (!rows.empty()) {
      try {
        data.first_time = MonthlySeries::from_rows(rows);
      } catch (const InvalidInput& e) {
        throw ParseError(std::string(files::kFirstTime), 0, 0, e.what());
      }
    }
  }

  reg.validate();
  return out;
}

// --- Writing ------------------------------------------------------------------

std::vector<std::string> write_dataset(const GeneratedData& data, const fs::path& dir) {
  fs::create_directories(dir);
  const Registry& reg = data.registry;
  std::vector<std::string> written;
  auto emit = [&](std::string_view name, const std::string& body) {
    write_file(dir / name, csv_line(dataset_header(name)) + body);
    written.emplace_back(name);
  };

  std::string body;
  for (const auto& [code, p] : data.postal_codes.entries()) {
    body += csv_line({code, number(p.lat), number(p.lon)});
  }
  emit(files::kPostalCodes, body);

  body.clear();
  for (const auto& [site, code] : data.site_postal_codes) body += csv_line({site, code});
  emit(files::kSites, body);

  std::string donations, suspensions, invitations;
  body.clear();
  for (const auto& d : reg.donors) {
    body += csv_line({d.id, std::string(to_string(d.sex)), format_date(d.birth_date),
                      std::to_string(d.max_eligible_age), d.blood_group.name(),
                      number(d.attendance_probability), d.adverse_reaction ? "1" : "0",
                      d.home_postal_code});
    for (const auto& x : d.donations) donations += csv_line({d.id, format_date(x.date), x.site_id});
    for (const auto& s : d.suspensions) {
      suspensions += csv_line({d.id, format_date(s.first), format_date(s.last)});
    }
    for (Date t : d.invitations_sent) invitations += csv_line({d.id, format_date(t)});
  }
  emit(files::kDonors, body);
  emit(files::kDonations, donations);
  emit(files::kSuspensions, suspensions);
  emit(files::kInvitations, invitations);

  body.clear();
  for (const auto& s : reg.sessions) {
    std::string dates;
    for (Date t : s.admissible_dates) {
      if (!dates.empty()) dates.push_back(';');
      dates += format_date(t);
    }
    body += csv_line({s.id, s.site_id, number(s.location.lat), number(s.location.lon),
                      format_date(s.start_date), format_date(s.end_date), dates, number(s.capacity)});
  }
  emit(files::kSessions, body);

  body.clear();
  for (const auto& [key, units] : data.panel.observations()) {
    body += csv_line({std::to_string(key.month.year), std::to_string(key.month.month),
                      key.group.name(), std::string(to_string(key.component)), number(units)});
  }
  emit(files::kDemandPanel, body);

  body.clear();
  for (std::size_t k = 0; k < data.first_time.size(); ++k) {
    const PlanningMonth m = data.first_time.month_at(k);
    body += csv_line({std::to_string(m.year), std::to_string(m.month),
                      number(data.first_time.values()[k])});
  }
  emit(files::kFirstTime, body);
  return written;
}

// --- Plans --------------------------------------------------------------------

std::string plan_csv(const std::vector<PlanRow>& rows) {
  std::string out = csv_line(dataset_header(files::kPlan));
  for (const auto& r : rows) {
    const auto& x = r.invitation;
    out += csv_line({std::to_string(r.window), x.donor_id, x.session_id, format_date(x.planned_date),
                     format_date(x.invited_on), number(x.distance_km), number(x.probability),
                     x.adverse ? "1" : "0"});
  }
  return out;
}

std::vector<PlanRow> parse_plan_csv(std::string_view text, std::string_view source) {
  const CsvTable table = parse_csv(text, source);
  require_header(table, dataset_header(files::kPlan), source);
  std::vector<PlanRow> rows;
  for (const auto& row : table.rows) {
    try {
      if (row.fields.size() != table.header.size()) {
        throw RowError{fmt::format("expected {} fields, found {}", table.header.size(),
                                   row.fields.size())};
      }
      const auto& f = row.fields;
      PlanRow r;
      r.window = to_int(f[0], "window");
      r.invitation.donor_id = f[1];
      r.invitation.session_id = f[2];
      r.invitation.planned_date = to_date(f[3], "planned_date");
      r.invitation.invited_on = to_date(f[4], "invited_on");
      r.invitation.distance_km = to_double(f[5], "distance_km");
      r.invitation.probability = to_double(f[6], "probability");
      r.invitation.adverse = to_bool(f[7], "adverse");
      rows.push_back(std::move(r));
    } catch (const RowError& e) {
      throw ParseError(std::string(source), row.line, 1, e.reason);
    }
  }
  return rows;
}

InvitationPlan plan_from_rows(const std::vector<PlanRow>& rows, std::string solver) {
  InvitationPlan plan;
  plan.solver = std::move(solver);
  plan.status = "loaded";
  for (const auto& r : rows) plan.invitations.push_back(r.invitation);
  plan.sort();
  return plan;
}

}  // namespace donorplan
