#include "donorplan/bilp_model.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "donorplan/errors.hpp"

namespace donorplan {

std::string_view to_string(DemandMode m) { return m == DemandMode::Hard ? "hard" : "soft"; }

DemandMode parse_demand_mode(std::string_view text) {
  if (text == "hard") return DemandMode::Hard;
  if (text == "soft") return DemandMode::Soft;
  throw InvalidInput(fmt::format("unknown demand mode '{}'", text));
}

std::string_view to_string(RowTag t) {
  switch (t) {
    case RowTag::Capacity:
      return "capacity";
    case RowTag::DemandHard:
      return "demand_hard";
    case RowTag::DemandSoft:
      return "demand_soft";
    case RowTag::MultiInviteLink:
      return "multi_invite_link";
    case RowTag::GapPair:
      return "gap_pair";
    case RowTag::AnnualLimit:
      return "annual_limit";
    case RowTag::InviteCap:
      return "invite_cap";
  }
  return "?";
}

void ModelConfig::validate() const {
  for (double w : {w_dist, w_inv, w_adv, w_dem}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInput(fmt::format("objective weight {} must be finite and >= 0", w));
    }
  }
  if (invite_cap_per_year && *invite_cap_per_year < 0) {
    throw InvalidInput("invite cap must be >= 0");
  }
}

double LinearConstraint::activity(const std::vector<double>& values) const {
  double a = 0.0;
  for (const auto& t : terms) a += t.coef * values[t.var];
  return a;
}

double LinearConstraint::violation(const std::vector<double>& values) const {
  const double a = activity(values);
  return sense == Sense::LessEqual ? std::max(0.0, a - rhs) : std::max(0.0, rhs - a);
}

std::optional<std::size_t> BilpModel::find_variable(std::string_view name) const {
  for (std::size_t k = 0; k < variables.size(); ++k) {
    if (variables[k].name == name) return k;
  }
  return std::nullopt;
}

std::size_t BilpModel::count(RowTag tag) const {
  return static_cast<std::size_t>(std::count_if(
      constraints.begin(), constraints.end(), [&](const auto& c) { return c.tag == tag; }));
}

std::size_t BilpModel::count(VarKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      variables.begin(), variables.end(), [&](const auto& v) { return v.kind == kind; }));
}

namespace {

std::string class_suffix(const DemandClass& c) {
  return fmt::format("{}_{}", c.month.compact(), c.group.name());
}

std::string compact_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04}{:02}{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

}  // namespace

BilpModel build_model(const FeasiblePairSet& pairs, const DemandTargets& targets,
                      const Registry& registry, const ModelConfig& cfg,
                      const EligibilityConfig& eligibility) {
  cfg.validate();
  BilpModel model;
  model.demand_mode = cfg.demand_mode;
  model.pair_count = pairs.size();

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs.pairs[k];
    Variable v;
    v.kind = VarKind::Assignment;
    v.name = fmt::format("x_{}_{}", p.donor_id, p.session_id);
    v.pair = k;
    v.donor_index = p.donor_index;
    v.demand_class = p.demand_class();
    model.variables.push_back(std::move(v));
    model.objective.push_back(cfg.w_dist * p.distance_km + (p.adverse ? cfg.w_adv : 0.0));
  }

  // Pairs per donor, ordered by (session start, session id); donors by id.
  std::map<std::string, std::vector<std::size_t>> donor_pairs;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    donor_pairs[pairs.pairs[k].donor_id].push_back(k);
  }
  for (auto& [id, ks] : donor_pairs) {
    std::sort(ks.begin(), ks.end(), [&](std::size_t a, std::size_t b) {
      const auto& sa = registry.sessions[pairs.pairs[a].session_index];
      const auto& sb = registry.sessions[pairs.pairs[b].session_index];
      return std::tie(sa.start_date, sa.id) < std::tie(sb.start_date, sb.id);
    });
  }

  std::map<std::string, std::size_t> multi_var;
  for (const auto& [id, ks] : donor_pairs) {
    const auto& donor = registry.donors[pairs.pairs[ks.front()].donor_index];
    if (ks.size() < 2 || is_high_frequency(donor, registry.as_of)) continue;
    Variable v;
    v.kind = VarKind::MultiInvite;
    v.name = fmt::format("y_{}", id);
    v.donor_index = pairs.pairs[ks.front()].donor_index;
    multi_var[id] = model.variables.size();
    model.variables.push_back(std::move(v));
    model.objective.push_back(cfg.w_inv);
  }

  std::vector<DemandClass> demand_classes;
  for (const auto& [cls, t] : targets) {
    if (t.residual < 0.0 || !std::isfinite(t.residual)) {
      throw ModelError(fmt::format("residual demand {} for {} is negative", t.residual, cls.str()));
    }
    if (t.residual > 0.0) demand_classes.push_back(cls);
  }

  std::map<DemandClass, std::size_t> slack_var;
  if (cfg.demand_mode == DemandMode::Soft) {
    double worst_pair = 0.0;
    for (double c : model.objective) worst_pair = std::max(worst_pair, c);
    if (!(cfg.w_dem > worst_pair + cfg.w_inv)) {
      throw InvalidInput(fmt::format(
          "w_dem {} must exceed the largest per-pair objective contribution {}", cfg.w_dem,
          worst_pair + cfg.w_inv));
    }
    for (const auto& cls : demand_classes) {
      Variable v;
      v.kind = VarKind::Slack;
      v.name = fmt::format("s_{}", class_suffix(cls));
      v.demand_class = cls;
      v.upper = std::numeric_limits<double>::infinity();
      slack_var[cls] = model.variables.size();
      model.variables.push_back(std::move(v));
      model.objective.push_back(cfg.w_dem);
    }
  }

  auto add_row = [&](std::string name, RowTag tag, std::vector<Term> terms, Sense sense,
                     double rhs) {
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    model.constraints.push_back({std::move(name), tag, std::move(terms), sense, rhs});
  };

  // Capacity, one row per session that has pairs.
  std::map<std::string, std::vector<std::size_t>> session_pairs;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    session_pairs[pairs.pairs[k].session_id].push_back(k);
  }
  for (const auto& [sid, ks] : session_pairs) {
    const auto& session = registry.sessions[pairs.pairs[ks.front()].session_index];
    if (session.capacity < 0.0 || !std::isfinite(session.capacity)) {
      throw ModelError(
          fmt::format("session {} has negative residual capacity {}", sid, session.capacity));
    }
    std::vector<Term> terms;
    for (std::size_t k : ks) terms.push_back({k, pairs.pairs[k].donor_probability});
    add_row(fmt::format("cap_{}", sid), RowTag::Capacity, std::move(terms), Sense::LessEqual,
            session.capacity);
  }

  // Demand.
  for (const auto& cls : demand_classes) {
    std::vector<Term> terms;
    if (auto it = pairs.by_class.find(cls); it != pairs.by_class.end()) {
      for (std::size_t k : it->second) terms.push_back({k, pairs.pairs[k].donor_probability});
    }
    const bool soft = cfg.demand_mode == DemandMode::Soft;
    if (soft) terms.push_back({slack_var.at(cls), 1.0});
    add_row(fmt::format("dem_{}", class_suffix(cls)), soft ? RowTag::DemandSoft : RowTag::DemandHard,
            std::move(terms), Sense::GreaterEqual, targets.at(cls).residual);
  }

  for (const auto& [id, ks] : donor_pairs) {
    const auto& donor = registry.donors[pairs.pairs[ks.front()].donor_index];
    const auto n = static_cast<double>(ks.size());

    if (auto it = multi_var.find(id); it != multi_var.end()) {
      std::vector<Term> terms;
      for (std::size_t k : ks) terms.push_back({k, 1.0});
      terms.push_back({it->second, -(n - 1.0)});
      add_row(fmt::format("link_{}", id), RowTag::MultiInviteLink, std::move(terms),
              Sense::LessEqual, 1.0);
    }

    for (std::size_t a = 0; a < ks.size(); ++a) {
      for (std::size_t b = a + 1; b < ks.size(); ++b) {
        const auto& sa = registry.sessions[pairs.pairs[ks[a]].session_index];
        const auto& sb = registry.sessions[pairs.pairs[ks[b]].session_index];
        if (!windows_conflict(sa, sb, eligibility.min_gap_days)) continue;
        add_row(fmt::format("gap_{}_{}_{}", id, sa.id, sb.id), RowTag::GapPair,
                {{ks[a], 1.0}, {ks[b], 1.0}}, Sense::LessEqual, 1.0);
      }
    }

    const int limit = annual_limit(donor);
    std::set<Date> anchors;
    for (std::size_t k : ks) anchors.insert(registry.sessions[pairs.pairs[k].session_index].end_date);
    for (Date t : anchors) {
      std::vector<std::size_t> in_window;
      for (std::size_t k : ks) {
        const Date end = registry.sessions[pairs.pairs[k].session_index].end_date;
        if (end <= t && days_between(end, t) < kRollingYearDays) in_window.push_back(k);
      }
      std::sort(in_window.begin(), in_window.end());
      const double rhs = std::max(0, limit - historical_donations(donor, t));
      if (cfg.prune_redundant_rows && rhs >= static_cast<double>(in_window.size())) continue;
      std::vector<Term> terms;
      for (std::size_t k : in_window) terms.push_back({k, 1.0});
      add_row(fmt::format("ann_{}_{}", id, compact_date(t)), RowTag::AnnualLimit,
              std::move(terms), Sense::LessEqual, rhs);
    }

    if (cfg.invite_cap_per_year) {
      const double rhs =
          std::max(0, *cfg.invite_cap_per_year - invitations_in_window(donor, registry.as_of));
      if (!cfg.prune_redundant_rows || rhs < n) {
        std::vector<Term> terms;
        for (std::size_t k : ks) terms.push_back({k, 1.0});
        add_row(fmt::format("icap_{}", id), RowTag::InviteCap, std::move(terms), Sense::LessEqual,
                rhs);
      }
    }
  }

  // Annual-limit rows with identical terms from different anchors: keep the
  // tightest.
  if (cfg.prune_redundant_rows) {
    std::map<std::vector<std::size_t>, std::size_t> tightest;
    std::vector<bool> keep(model.constraints.size(), true);
    for (std::size_t r = 0; r < model.constraints.size(); ++r) {
      const auto& row = model.constraints[r];
      if (row.tag != RowTag::AnnualLimit) continue;
      std::vector<std::size_t> vars;
      for (const auto& t : row.terms) vars.push_back(t.var);
      auto [it, inserted] = tightest.emplace(vars, r);
      if (inserted) continue;
      if (row.rhs < model.constraints[it->second].rhs) {
        keep[it->second] = false;
        it->second = r;
      } else {
        keep[r] = false;
      }
    }
    std::vector<LinearConstraint> kept;
    for (std::size_t r = 0; r < model.constraints.size(); ++r) {
      if (keep[r]) kept.push_back(std::move(model.constraints[r]));
    }
    model.constraints = std::move(kept);
  }
  return model;
}

double evaluate_objective(const BilpModel& model, const std::vector<double>& values) {
  if (values.size() != model.variables.size()) {
    throw InvalidInput(fmt::format("assignment has {} values for {} variables", values.size(),
                                   model.variables.size()));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) total += model.objective[k] * values[k];
  return total;
}

double evaluate_objective(const BilpModel& model, const std::map<std::string, double>& values) {
  std::vector<double> dense(model.variables.size());
  for (std::size_t k = 0; k < model.variables.size(); ++k) {
    auto it = values.find(model.variables[k].name);
    if (it == values.end()) {
      throw InvalidInput(fmt::format("assignment misses variable {}", model.variables[k].name));
    }
    dense[k] = it->second;
  }
  return evaluate_objective(model, dense);
}

std::vector<std::size_t> violated_rows(const BilpModel& model, const std::vector<double>& values,
                                       double tol) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < model.constraints.size(); ++r) {
    if (model.constraints[r].violation(values) > tol) out.push_back(r);
  }
  return out;
}

// --- MPS ----------------------------------------------------------------------------

MpsDocument to_mps_document(const BilpModel& model) {
  MpsDocument doc;
  for (const auto& c : model.constraints) {
    doc.rows.push_back({c.name, c.sense == Sense::LessEqual ? 'L' : 'G', c.rhs});
  }
  for (std::size_t k = 0; k < model.variables.size(); ++k) {
    const auto& v = model.variables[k];
    doc.columns.push_back({v.name, v.is_integer(), v.lower, v.upper, model.objective[k], {}});
  }
  for (std::size_t r = 0; r < model.constraints.size(); ++r) {
    for (const auto& t : model.constraints[r].terms) {
      doc.columns[t.var].entries.emplace_back(r, t.coef);
    }
  }
  return doc;
}

namespace {

std::string fixed_line(std::string_view f1, std::string_view f2, std::string_view f3 = {},
                       std::string_view f4 = {}) {
  std::string line = fmt::format(" {:<2} {:<8}  {:<8}  {}", f1, f2, f3, f4);
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line;
}

std::string num(double v) { return fmt::format("{}", v); }

void check_name(const std::string& name) {
  if (name.empty() || std::any_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isspace(c) != 0;
      })) {
    throw ModelError(fmt::format("name '{}' cannot be written to MPS", name));
  }
}

}  // namespace

std::string write_mps(const MpsDocument& doc) {
  std::string out;
  auto line = [&](const std::string& s) {
    out += s;
    out += '\n';
  };
  line(fmt::format("NAME          {}", doc.name));
  line("ROWS");
  line(fixed_line("N", "OBJ"));
  for (const auto& r : doc.rows) {
    check_name(r.name);
    line(fixed_line(std::string(1, r.sense), r.name));
  }
  line("COLUMNS");
  bool in_int = false;
  int marker = 0;
  for (const auto& c : doc.columns) {
    check_name(c.name);
    if (c.integer != in_int) {
      line(fixed_line("", fmt::format("MARKER{}", marker++), "'MARKER'",
                      c.integer ? "'INTORG'" : "'INTEND'"));
      in_int = c.integer;
    }
    line(fixed_line("", c.name, "OBJ", num(c.objective)));
    for (const auto& [r, v] : c.entries) line(fixed_line("", c.name, doc.rows.at(r).name, num(v)));
  }
  if (in_int) line(fixed_line("", fmt::format("MARKER{}", marker++), "'MARKER'", "'INTEND'"));
  line("RHS");
  for (const auto& r : doc.rows) {
    if (r.rhs != 0.0) line(fixed_line("", "RHS", r.name, num(r.rhs)));
  }
  line("BOUNDS");
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& c : doc.columns) {
    if (c.integer && c.lower == 0.0 && c.upper == 1.0) {
      line(fixed_line("BV", "BND", c.name));
      continue;
    }
    if (c.lower == -inf && c.upper == inf) {
      line(fixed_line("FR", "BND", c.name));
      continue;
    }
    if (c.lower == -inf) {
      line(fixed_line("MI", "BND", c.name));
    } else if (c.lower != 0.0) {
      line(fixed_line("LO", "BND", c.name, num(c.lower)));
    }
    if (c.upper != inf) {
      line(fixed_line("UP", "BND", c.name, num(c.upper)));
    } else if (c.integer) {
      line(fixed_line("PL", "BND", c.name));
    }
  }
  line("ENDATA");
  return out;
}

std::string export_mps(const BilpModel& model) { return write_mps(to_mps_document(model)); }

namespace {

class MpsReader {
 public:
  explicit MpsReader(std::string_view text) : text_(text) {}

  MpsDocument read() {
    enum class Section { None, Rows, Columns, Rhs, Bounds, Done } section = Section::None;
    std::size_t pos = 0;
    while (pos <= text_.size() && section != Section::Done) {
      const std::size_t eol = std::min(text_.find('\n', pos), text_.size());
      std::string_view raw = text_.substr(pos, eol - pos);
      ++line_no_;
      pos = eol + 1;
      if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
      if (raw.empty() || raw.front() == '*') {
        if (eol == text_.size()) break;
        continue;
      }
      const auto tok = split(raw);
      if (tok.empty()) continue;
      if (raw.front() != ' ' && raw.front() != '\t') {
        const std::string_view head = tok.front();
        if (head == "NAME") {
          doc_.name = tok.size() > 1 ? std::string(tok[1]) : "";
        } else if (head == "ROWS") {
          section = Section::Rows;
        } else if (head == "COLUMNS") {
          section = Section::Columns;
        } else if (head == "RHS") {
          section = Section::Rhs;
        } else if (head == "BOUNDS") {
          section = Section::Bounds;
        } else if (head == "ENDATA") {
          section = Section::Done;
        } else {
          fail(1, fmt::format("unsupported section '{}'", head));
        }
        continue;
      }
      switch (section) {
        case Section::Rows:
          row_line(tok);
          break;
        case Section::Columns:
          column_line(tok);
          break;
        case Section::Rhs:
          rhs_line(tok);
          break;
        case Section::Bounds:
          bound_line(tok);
          break;
        default:
          fail(1, "data line outside a section");
      }
    }
    if (section != Section::Done) fail(1, "missing ENDATA");
    for (auto& c : doc_.columns) std::sort(c.entries.begin(), c.entries.end());
    return std::move(doc_);
  }

 private:
  std::vector<std::string_view> split(std::string_view s) {
    std::vector<std::string_view> out;
    columns_.clear();
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
      if (i >= s.size()) break;
      std::size_t j = i;
      while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
      out.push_back(s.substr(i, j - i));
      columns_.push_back(i + 1);
      i = j;
    }
    return out;
  }

  [[noreturn]] void fail(std::size_t token, const std::string& what) const {
    const std::size_t col = token < columns_.size() ? columns_[token] : 1;
    throw ParseError("<mps>", line_no_, col, what);
  }

  double number(std::string_view s, std::size_t token) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      fail(token, fmt::format("bad number '{}'", s));
    }
    return v;
  }

  std::size_t row_index(std::string_view name, std::size_t token) const {
    auto it = rows_.find(std::string(name));
    if (it == rows_.end()) fail(token, fmt::format("unknown row '{}'", name));
    return it->second;
  }

  std::size_t column_index(std::string_view name, std::size_t token) const {
    auto it = cols_.find(std::string(name));
    if (it == cols_.end()) fail(token, fmt::format("unknown column '{}'", name));
    return it->second;
  }

  void row_line(const std::vector<std::string_view>& tok) {
    if (tok.size() != 2) fail(0, "ROWS entry needs a type and a name");
    const std::string_view type = tok[0];
    if (type == "N") {
      if (!objective_.empty()) fail(0, "more than one objective row");
      objective_ = std::string(tok[1]);
      return;
    }
    if (type != "L" && type != "G" && type != "E") fail(0, fmt::format("bad row type '{}'", type));
    if (rows_.count(std::string(tok[1])) || tok[1] == objective_) {
      fail(1, fmt::format("duplicate row '{}'", tok[1]));
    }
    rows_.emplace(std::string(tok[1]), doc_.rows.size());
    doc_.rows.push_back({std::string(tok[1]), type[0], 0.0});
  }

  void column_line(const std::vector<std::string_view>& tok) {
    if (tok.size() == 3 && tok[1] == "'MARKER'") {
      if (tok[2] == "'INTORG'") {
        integer_ = true;
      } else if (tok[2] == "'INTEND'") {
        integer_ = false;
      } else {
        fail(2, "bad marker");
      }
      return;
    }
    if (tok.size() != 3 && tok.size() != 5) fail(0, "COLUMNS entry needs 3 or 5 fields");
    const std::string name(tok[0]);
    auto it = cols_.find(name);
    if (it == cols_.end()) {
      it = cols_.emplace(name, doc_.columns.size()).first;
      MpsColumn c;
      c.name = name;
      c.integer = integer_;
      if (integer_) c.upper = std::numeric_limits<double>::infinity();
      doc_.columns.push_back(std::move(c));
    } else if (doc_.columns.back().name != name) {
      fail(0, fmt::format("column '{}' is not contiguous", name));
    }
    auto& col = doc_.columns[it->second];
    for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
      const double v = number(tok[f + 1], f + 1);
      if (tok[f] == objective_) {
        col.objective = v;
        continue;
      }
      const std::size_t r = row_index(tok[f], f);
      for (const auto& e : col.entries) {
        if (e.first == r) fail(f, fmt::format("duplicate entry for row '{}'", tok[f]));
      }
      col.entries.emplace_back(r, v);
    }
  }

  void rhs_line(const std::vector<std::string_view>& tok) {
    if (tok.size() != 3 && tok.size() != 5) fail(0, "RHS entry needs 3 or 5 fields");
    for (std::size_t f = 1; f + 1 < tok.size(); f += 2) {
      const double v = number(tok[f + 1], f + 1);
      if (tok[f] == objective_) continue;
      doc_.rows[row_index(tok[f], f)].rhs = v;
    }
  }

  void bound_line(const std::vector<std::string_view>& tok) {
    if (tok.size() < 3) fail(0, "BOUNDS entry needs a type, a set name and a column");
    auto& c = doc_.columns[column_index(tok[2], 2)];
    const std::string_view type = tok[0];
    constexpr double inf = std::numeric_limits<double>::infinity();
    auto value = [&]() {
      if (tok.size() != 4) fail(0, fmt::format("bound '{}' needs a value", type));
      return number(tok[3], 3);
    };
    if (type == "BV") {
      c.integer = true;
      c.lower = 0.0;
      c.upper = 1.0;
    } else if (type == "UP") {
      c.upper = value();
    } else if (type == "LO") {
      c.lower = value();
    } else if (type == "FX") {
      c.lower = c.upper = value();
    } else if (type == "FR") {
      c.lower = -inf;
      c.upper = inf;
    } else if (type == "MI") {
      c.lower = -inf;
    } else if (type == "PL") {
      c.upper = inf;
    } else {
      fail(0, fmt::format("unsupported bound type '{}'", type));
    }
  }

  std::string_view text_;
  std::size_t line_no_ = 0;
  std::vector<std::size_t> columns_;
  MpsDocument doc_;
  std::string objective_;
  std::unordered_map<std::string, std::size_t> rows_;
  std::unordered_map<std::string, std::size_t> cols_;
  bool integer_ = false;
};

}  // namespace

MpsDocument parse_mps(std::string_view text) { return MpsReader(text).read(); }

}  // namespace donorplan
