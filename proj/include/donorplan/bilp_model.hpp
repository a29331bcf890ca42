#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "donorplan/core_model.hpp"
#include "donorplan/demand.hpp"
#include "donorplan/eligibility.hpp"

namespace donorplan {

enum class DemandMode : std::uint8_t { Hard, Soft };

std::string_view to_string(DemandMode m);
DemandMode parse_demand_mode(std::string_view text);

struct ModelConfig {
  double w_dist = 1.0;
  double w_inv = 1.0;
  double w_adv = 10.0;
  double w_dem = 1e4;  // soft mode only
  DemandMode demand_mode = DemandMode::Hard;
  std::optional<int> invite_cap_per_year;  // 5 when enabled
  // Drop annual-limit and invite-cap rows that can never bind.
  bool prune_redundant_rows = true;

  // Throws InvalidInput on negative weights or a negative cap.
  void validate() const;
};

inline constexpr int kDefaultInviteCap = 5;

enum class VarKind : std::uint8_t { Assignment, MultiInvite, Slack };

struct Variable {
  VarKind kind = VarKind::Assignment;
  std::string name;
  std::size_t pair = 0;         // Assignment: index into FeasiblePairSet::pairs
  std::size_t donor_index = 0;  // Assignment, MultiInvite
  DemandClass demand_class;     // Slack
  double lower = 0.0;
  double upper = 1.0;

  bool is_integer() const { return kind != VarKind::Slack; }
};

enum class Sense : std::uint8_t { LessEqual, GreaterEqual };

enum class RowTag : std::uint8_t {
  Capacity,
  DemandHard,
  DemandSoft,
  MultiInviteLink,
  GapPair,
  AnnualLimit,
  InviteCap,
};

std::string_view to_string(RowTag t);

struct Term {
  std::size_t var = 0;
  double coef = 0.0;
  friend bool operator==(const Term&, const Term&) = default;
};

struct LinearConstraint {
  std::string name;
  RowTag tag = RowTag::Capacity;
  std::vector<Term> terms;  // sorted by variable, no duplicates
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;

  double activity(const std::vector<double>& values) const;
  // Amount by which `values` breaks the row; 0 when satisfied.
  double violation(const std::vector<double>& values) const;
};

// Assignment variables come first, one per feasible pair in pair order, so
// variable k < pair_count is the pair k.
struct BilpModel {
  std::vector<Variable> variables;
  std::vector<LinearConstraint> constraints;
  std::vector<double> objective;  // one coefficient per variable
  std::size_t pair_count = 0;
  DemandMode demand_mode = DemandMode::Hard;

  std::optional<std::size_t> find_variable(std::string_view name) const;
  std::size_t count(RowTag tag) const;
  std::size_t count(VarKind kind) const;
};

// Variable and row names: x_<donor>_<session>, y_<donor>, s_<yyyymm>_<group>;
// cap_<session>, dem_<yyyymm>_<group>, link_<donor>,
// gap_<donor>_<session>_<session>, ann_<donor>_<yyyymmdd>, icap_<donor>.
//
// Capacity uses registry.sessions[j].capacity as the (residual) capacity and
// throws ModelError when it is negative. Multi-invite variables exist for
// donors that are not high-frequency at registry.as_of and have >= 2 pairs.
// Annual-limit rows are anchored on session end dates with rhs
// max(0, L_i - H_i(end)). In soft mode w_dem must exceed the largest
// single-pair objective contribution; InvalidInput otherwise.
BilpModel build_model(const FeasiblePairSet& pairs, const DemandTargets& targets,
                      const Registry& registry, const ModelConfig& cfg,
                      const EligibilityConfig& eligibility);

// Throws InvalidInput when the vector does not cover every variable.
double evaluate_objective(const BilpModel& model, const std::vector<double>& values);
// Throws InvalidInput naming the first variable missing from the map.
double evaluate_objective(const BilpModel& model, const std::map<std::string, double>& values);

// Indices of rows violated by more than tol.
std::vector<std::size_t> violated_rows(const BilpModel& model, const std::vector<double>& values,
                                       double tol = 1e-9);

// ---------------------------------------------------------------------------
// MPS
// ---------------------------------------------------------------------------

struct MpsRow {
  std::string name;
  char sense = 'L';  // 'L', 'G', 'E'
  double rhs = 0.0;
  friend bool operator==(const MpsRow&, const MpsRow&) = default;
};

struct MpsColumn {
  std::string name;
  bool integer = false;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  double objective = 0.0;
  // (row index, coefficient), sorted by row index.
  std::vector<std::pair<std::size_t, double>> entries;
  friend bool operator==(const MpsColumn&, const MpsColumn&) = default;
};

struct MpsDocument {
  std::string name = "DONORPLAN";
  std::vector<MpsRow> rows;  // constraint rows; the objective row is implicit
  std::vector<MpsColumn> columns;
  friend bool operator==(const MpsDocument&, const MpsDocument&) = default;
};

MpsDocument to_mps_document(const BilpModel& model);

// MPS text (NAME, ROWS, COLUMNS with integer markers, RHS, BOUNDS, ENDATA).
// Fields are laid out at the fixed-format positions; names longer than the
// fixed widths spill over, which free-format readers accept.
std::string export_mps(const BilpModel& model);
std::string write_mps(const MpsDocument& doc);

// Reads what write_mps produces (free-format MPS with N/L/G/E rows, integer
// markers and UP/LO/BV/FR/MI/PL bounds). Throws ParseError.
MpsDocument parse_mps(std::string_view text);

}  // namespace donorplan
