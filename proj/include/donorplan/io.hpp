#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "donorplan/datagen.hpp"
#include "donorplan/plan.hpp"

namespace donorplan {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

// RFC 4180 with optional UTF-8 BOM and CRLF line ends; blank lines are
// skipped. Throws ParseError naming `source`, line and column on an
// unterminated or misplaced quote.
CsvTable parse_csv(std::string_view text, std::string_view source);

// Throws ParseError naming the first mismatching column.
void require_header(const CsvTable& table, const std::vector<std::string>& expected,
                    std::string_view source);

// Quotes the field when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);
std::string csv_line(const std::vector<std::string>& fields);

// ---------------------------------------------------------------------------
// Checksums
// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes);
// Throws InvalidInput when the file cannot be read.
std::string file_sha256(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

namespace files {
inline constexpr std::string_view kDonors = "donors.csv";
inline constexpr std::string_view kDonations = "donations.csv";
inline constexpr std::string_view kSuspensions = "suspensions.csv";
inline constexpr std::string_view kInvitations = "invitations.csv";
inline constexpr std::string_view kSessions = "sessions.csv";
inline constexpr std::string_view kSites = "sites.csv";
inline constexpr std::string_view kDemandPanel = "demand_panel.csv";
inline constexpr std::string_view kFirstTime = "first_time.csv";
inline constexpr std::string_view kPostalCodes = "postal_codes.csv";
inline constexpr std::string_view kPlan = "plan.csv";
inline constexpr std::string_view kReport = "report.csv";
}  // namespace files

const std::vector<std::string>& dataset_header(std::string_view file);

struct RowRejection {
  std::string file;
  std::size_t line = 0;
  std::string reason;
};

struct EntityCounts {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

struct IngestionReport {
  std::map<std::string, EntityCounts> counts;  // by file name
  std::vector<RowRejection> rejections;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> checksums;  // file name -> SHA-256

  std::size_t total_rejected() const { return rejections.size(); }
};

struct IngestOptions {
  Date as_of{};
};

struct Ingested {
  GeneratedData data;
  IngestionReport report;
};

// Reads the conventional files from `dir`. donors, sessions, demand_panel
// and postal_codes are required; the others may be absent. Rows that break a
// field rule or a registry invariant are rejected individually; the accepted
// rows always form a valid registry. Home anchors come from the postal table,
// brigade anchors from the site of the latest donation with a known site.
// Throws ParseError on unreadable or structurally broken files.
Ingested ingest(const std::filesystem::path& dir, const IngestOptions& opts);

// Writes every dataset file into `dir` (created if needed). Returns the
// written file names.
std::vector<std::string> write_dataset(const GeneratedData& data, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Plans
// ---------------------------------------------------------------------------

struct PlanRow {
  int window = 0;
  PlannedInvitation invitation;
};

std::string plan_csv(const std::vector<PlanRow>& rows);
// Throws ParseError on structural problems and on any malformed row.
std::vector<PlanRow> parse_plan_csv(std::string_view text, std::string_view source);

// The rows as one plan, sorted.
InvitationPlan plan_from_rows(const std::vector<PlanRow>& rows, std::string solver = "file");

}  // namespace donorplan
