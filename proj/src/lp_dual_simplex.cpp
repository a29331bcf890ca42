#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "donorplan/errors.hpp"
#include "donorplan/solver_exact.hpp"

namespace donorplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Greedy edge cover of a conflict graph by cliques, deterministic in vertex
// order. Vertices are model variable indices.
std::vector<std::vector<std::size_t>> clique_cover(
    const std::map<std::size_t, std::set<std::size_t>>& adjacent) {
  std::set<std::pair<std::size_t, std::size_t>> covered;
  std::vector<std::vector<std::size_t>> cliques;
  for (const auto& [u, nbrs] : adjacent) {
    for (std::size_t v : nbrs) {
      if (v < u || covered.count({u, v})) continue;
      std::vector<std::size_t> clique{u, v};
      for (std::size_t w : nbrs) {
        if (w == v) continue;
        const auto& wn = adjacent.at(w);
        if (std::all_of(clique.begin(), clique.end(),
                        [&](std::size_t c) { return c == w || wn.count(c); })) {
          clique.push_back(w);
        }
      }
      std::sort(clique.begin(), clique.end());
      for (std::size_t a = 0; a < clique.size(); ++a) {
        for (std::size_t b = a + 1; b < clique.size(); ++b) covered.insert({clique[a], clique[b]});
      }
      cliques.push_back(std::move(clique));
    }
  }
  return cliques;
}

}  // namespace

LpProblem LpProblem::from_model(const BilpModel& model, bool merge_conflict_cliques) {
  LpProblem lp;
  lp.cols = static_cast<int>(model.variables.size());
  lp.columns.resize(model.variables.size());
  lp.cost = model.objective;
  for (const auto& v : model.variables) {
    lp.lower.push_back(v.lower);
    lp.upper.push_back(v.upper);
  }
  auto add_row = [&](const std::vector<Term>& terms, Sense sense, double rhs) {
    const int r = lp.rows++;
    for (const auto& t : terms) lp.columns[t.var].emplace_back(r, t.coef);
    lp.row_lower.push_back(sense == Sense::GreaterEqual ? rhs : -kInf);
    lp.row_upper.push_back(sense == Sense::LessEqual ? rhs : kInf);
  };

  std::map<std::size_t, std::map<std::size_t, std::set<std::size_t>>> conflicts;  // by donor
  for (const auto& c : model.constraints) {
    const bool pairwise = c.tag == RowTag::GapPair && c.terms.size() == 2 &&
                          c.sense == Sense::LessEqual && c.rhs == 1.0 &&
                          c.terms[0].coef == 1.0 && c.terms[1].coef == 1.0;
    if (merge_conflict_cliques && pairwise) {
      const std::size_t a = c.terms[0].var, b = c.terms[1].var;
      auto& g = conflicts[model.variables[a].donor_index];
      g[a].insert(b);
      g[b].insert(a);
      continue;
    }
    add_row(c.terms, c.sense, c.rhs);
  }
  for (const auto& [donor, graph] : conflicts) {
    for (const auto& clique : clique_cover(graph)) {
      std::vector<Term> terms;
      for (std::size_t v : clique) terms.push_back({v, 1.0});
      add_row(terms, Sense::LessEqual, 1.0);
    }
  }
  return lp;
}

namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr std::size_t kRefactorInterval = 64;
constexpr int kDegenerateBeforeBland = 50;
constexpr double kCostPerturbation = 1e-7;

// Variables 0..n-1 are the LP columns; n + r is the slack of row r, defined by
// a_r x - s_r = 0 with s_r within the row bounds.
class DualSimplex {
 public:
  explicit DualSimplex(const LpProblem& lp)
      : lp_(lp), m_(lp.rows), n_(lp.cols), total_(lp.rows + lp.cols) {
    lo_.resize(total_);
    up_.resize(total_);
    cost_.assign(total_, 0.0);
    // A small deterministic perturbation of the working costs breaks the dual
    // ties that zero-cost columns create; the reported bound uses the true
    // costs.
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp.lower[j];
      up_[j] = lp.upper[j];
      const double spread = static_cast<double>((static_cast<std::uint64_t>(j) * 2654435761ULL) % 1000) / 1000.0;
      cost_[j] = lp.cost[j] + kCostPerturbation * (1.0 + spread) * std::max(1.0, std::abs(lp.cost[j]));
    }
    for (int r = 0; r < m_; ++r) {
      lo_[n_ + r] = lp.row_lower[r];
      up_[n_ + r] = lp.row_upper[r];
      slack_columns_.push_back({{r, -1.0}});
    }
    rows_.resize(m_);
    for (int j = 0; j < n_; ++j) {
      for (const auto& [row, v] : lp.columns[j]) rows_[row].emplace_back(j, v);
    }
    alpha_.assign(total_, 0.0);
    touched_flag_.assign(total_, 0);
  }

  LpResult run(const LpBasis* warm, long max_iterations, std::optional<Deadline> deadline) {
    LpResult res;
    if (max_iterations < 0) max_iterations = 50L * (m_ + n_) + 10000;
    for (int j = 0; j < total_; ++j) {
      if (lo_[j] > up_[j]) {
        res.status = LpStatus::Infeasible;
        return res;
      }
    }
    bool cold = !(warm && static_cast<int>(warm->basic.size()) == m_ &&
                  static_cast<int>(warm->at_upper.size()) == total_);
    if (!cold) {
      load_basis(*warm);
      if (!refactor() || !make_dual_feasible()) cold = true;
    }
    if (cold) {
      slack_basis();
      if (!refactor() || !make_dual_feasible()) {
        res.status = LpStatus::DualInfeasible;
        return res;
      }
    }

    int degenerate = 0;
    long it = 0;
    std::vector<double> rho(m_), w(m_);
    for (;; ++it) {
      if (it >= max_iterations) {
        res.status = LpStatus::IterationLimit;
        break;
      }
      if (deadline && it % 32 == 0 && std::chrono::steady_clock::now() > *deadline) {
        res.status = LpStatus::TimeLimit;
        break;
      }
      if (etas_.size() >= kRefactorInterval) {
        if (!refactor() || !make_dual_feasible()) {
          res.status = LpStatus::DualInfeasible;
          break;
        }
      }
      const bool bland = degenerate > kDegenerateBeforeBland;
      const int r = choose_leaving(bland);
      if (r < 0) {
        if (etas_.empty()) {
          res.status = LpStatus::Optimal;
          break;
        }
        // Confirm on a fresh factorization.
        if (!refactor() || !make_dual_feasible()) {
          res.status = LpStatus::DualInfeasible;
          break;
        }
        continue;
      }
      const int leaving = basic_[r];
      const bool going_up = x_[leaving] < lo_[leaving];
      const double target = going_up ? lo_[leaving] : up_[leaving];

      std::fill(rho.begin(), rho.end(), 0.0);
      rho[r] = 1.0;
      btran(rho);
      pivot_row(rho);

      const double delta = going_up ? lo_[leaving] - x_[leaving] : x_[leaving] - up_[leaving];
      flips_.clear();
      const int q = choose_entering(going_up, bland, delta);
      if (q < 0) {
        if (!etas_.empty()) {
          if (!refactor() || !make_dual_feasible()) {
            res.status = LpStatus::DualInfeasible;
            break;
          }
          continue;
        }
        res.status = LpStatus::Infeasible;
        break;
      }
      const double alpha_q = alpha_[q];

      std::fill(w.begin(), w.end(), 0.0);
      for (const auto& [row, v] : column(q)) w[row] += v;
      ftran(w);
      if (std::abs(w[r] - alpha_q) > 1e-7 * (1.0 + std::abs(alpha_q))) {
        if (!etas_.empty()) {
          if (!refactor() || !make_dual_feasible()) {
            res.status = LpStatus::DualInfeasible;
            break;
          }
          continue;
        }
      }

      if (!flips_.empty()) apply_flips();

      const double theta_d = d_[q] / alpha_q;
      for (int j : touched_) d_[j] -= theta_d * alpha_[j];
      d_[q] = 0.0;
      d_[leaving] = -theta_d;
      degenerate = std::abs(theta_d) <= 1e-12 ? degenerate + 1 : 0;

      const double theta_p = (x_[leaving] - target) / w[r];
      x_[q] += theta_p;
      for (int i = 0; i < m_; ++i) {
        if (w[i] != 0.0) x_[basic_[i]] -= theta_p * w[i];
      }
      x_[leaving] = target;
      at_upper_[leaving] = going_up ? 0 : 1;
      at_upper_[q] = 0;

      basic_[r] = q;
      pos_[q] = r;
      pos_[leaving] = -1;

      Eta eta{r, w[r], {}};
      for (int i = 0; i < m_; ++i) {
        if (i != r && std::abs(w[i]) > 1e-14) eta.col.emplace_back(i, w[i]);
      }
      etas_.push_back(std::move(eta));
    }

    res.iterations = it;
    res.x.assign(x_.begin(), x_.begin() + n_);
    res.objective = 0.0;
    for (int j = 0; j < n_; ++j) res.objective += lp_.cost[j] * x_[j];
    if (res.status == LpStatus::Optimal) res.dual_bound = lagrangian_bound();
    res.basis.basic = basic_;
    res.basis.at_upper = at_upper_;
    return res;
  }

 private:
  struct Eta {
    int row;
    double pivot;
    std::vector<std::pair<int, double>> col;  // off-pivot entries
  };

  const std::vector<std::pair<int, double>>& column(int j) const {
    return j < n_ ? lp_.columns[j] : slack_columns_[j - n_];
  }

  double nonbasic_value(int j, bool want_upper) const {
    if (want_upper && std::isfinite(up_[j])) return up_[j];
    if (std::isfinite(lo_[j])) return lo_[j];
    if (std::isfinite(up_[j])) return up_[j];
    return 0.0;
  }

  void place_nonbasic(int j, bool want_upper) {
    x_[j] = nonbasic_value(j, want_upper);
    at_upper_[j] = (std::isfinite(up_[j]) && x_[j] == up_[j] && lo_[j] != up_[j]) ? 1 : 0;
  }

  void slack_basis() {
    basic_.resize(m_);
    pos_.assign(total_, -1);
    at_upper_.assign(total_, 0);
    x_.assign(total_, 0.0);
    for (int r = 0; r < m_; ++r) {
      basic_[r] = n_ + r;
      pos_[n_ + r] = r;
    }
    for (int j = 0; j < n_; ++j) place_nonbasic(j, cost_[j] < 0.0);
  }

  void load_basis(const LpBasis& b) {
    basic_ = b.basic;
    pos_.assign(total_, -1);
    x_.assign(total_, 0.0);
    at_upper_ = b.at_upper;
    for (int r = 0; r < m_; ++r) pos_[basic_[r]] = r;
    for (int j = 0; j < total_; ++j) {
      if (pos_[j] < 0) place_nonbasic(j, at_upper_[j] != 0);
    }
  }

  // B = [A_S | -I_T]. Rows whose slack is basic are solved directly; the
  // structural block K = A[rows with nonbasic slack, S] is factorized.
  bool refactor() {
    etas_.clear();
    structural_pos_.clear();
    structural_col_.clear();
    block_rows_.clear();
    block_index_.assign(m_, -1);
    slack_pos_.assign(m_, -1);
    for (int i = 0; i < m_; ++i) {
      if (basic_[i] < n_) {
        structural_pos_.push_back(i);
        structural_col_.push_back(basic_[i]);
      }
    }
    for (int r = 0; r < m_; ++r) {
      if (pos_[n_ + r] < 0) {
        block_index_[r] = static_cast<int>(block_rows_.size());
        block_rows_.push_back(r);
      } else {
        slack_pos_[r] = pos_[n_ + r];
      }
    }
    const int k = static_cast<int>(structural_pos_.size());
    if (static_cast<int>(block_rows_.size()) != k) return false;
    if (k > 0) {
      Eigen::SparseMatrix<double> kmat(k, k);
      std::vector<Eigen::Triplet<double>> trips;
      for (int c = 0; c < k; ++c) {
        for (const auto& [row, v] : lp_.columns[structural_col_[c]]) {
          if (block_index_[row] >= 0) trips.emplace_back(block_index_[row], c, v);
        }
      }
      kmat.setFromTriplets(trips.begin(), trips.end());
      kmat.makeCompressed();
      lu_.compute(kmat);
      if (lu_.info() != Eigen::Success) return false;
    }
    recompute_primal();
    recompute_duals(cost_);
    return true;
  }

  // Solves B0 z = v in place (z indexed by basis position).
  void base_solve(std::vector<double>& v) const {
    const int k = static_cast<int>(structural_pos_.size());
    Eigen::VectorXd zs;
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (int b = 0; b < k; ++b) rhs[b] = v[block_rows_[b]];
      zs = lu_.solve(rhs);
    }
    std::vector<double> t(m_, 0.0);
    for (int c = 0; c < k; ++c) {
      if (zs[c] == 0.0) continue;
      for (const auto& [row, a] : lp_.columns[structural_col_[c]]) t[row] += a * zs[c];
    }
    std::vector<double> z(m_, 0.0);
    for (int r = 0; r < m_; ++r) {
      if (block_index_[r] < 0) z[slack_pos_[r]] = t[r] - v[r];
    }
    for (int c = 0; c < k; ++c) z[structural_pos_[c]] = zs[c];
    v.swap(z);
  }

  // Solves B0' y = c in place (c indexed by basis position, y by row).
  void base_solve_transposed(std::vector<double>& c) const {
    std::vector<double> y(m_, 0.0);
    for (int r = 0; r < m_; ++r) {
      if (block_index_[r] < 0) y[r] = -c[slack_pos_[r]];
    }
    const int k = static_cast<int>(structural_pos_.size());
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (int s = 0; s < k; ++s) {
        double acc = c[structural_pos_[s]];
        for (const auto& [row, a] : lp_.columns[structural_col_[s]]) {
          if (block_index_[row] < 0) acc -= a * y[row];
        }
        rhs[s] = acc;
      }
      const Eigen::VectorXd yb = lu_.transpose().solve(rhs);
      for (int b = 0; b < k; ++b) y[block_rows_[b]] = yb[b];
    }
    c.swap(y);
  }

  void ftran(std::vector<double>& v) const {
    if (m_ == 0) return;
    base_solve(v);
    for (const auto& e : etas_) {
      const double vr = v[e.row] / e.pivot;
      if (vr != 0.0) {
        for (const auto& [i, val] : e.col) v[i] -= val * vr;
      }
      v[e.row] = vr;
    }
  }

  void btran(std::vector<double>& v) const {
    if (m_ == 0) return;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v[it->row];
      for (const auto& [i, val] : it->col) s -= v[i] * val;
      v[it->row] = s / it->pivot;
    }
    base_solve_transposed(v);
  }

  void recompute_primal() {
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < total_; ++j) {
      if (pos_[j] >= 0 || x_[j] == 0.0) continue;
      for (const auto& [row, v] : column(j)) rhs[row] -= v * x_[j];
    }
    ftran(rhs);
    for (int i = 0; i < m_; ++i) x_[basic_[i]] = rhs[i];
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    std::vector<double> y(m_);
    for (int i = 0; i < m_; ++i) y[i] = cost[basic_[i]];
    btran(y);
    return y;
  }

  void recompute_duals(const std::vector<double>& cost) {
    const auto y = duals(cost);
    d_.assign(total_, 0.0);
    for (int j = 0; j < total_; ++j) {
      if (pos_[j] >= 0) continue;
      double s = cost[j];
      for (const auto& [row, v] : column(j)) s -= v * y[row];
      d_[j] = s;
    }
  }

  // Puts every nonbasic variable on the bound its reduced cost prefers. Small
  // residual dual infeasibilities on one-sided variables are absorbed by
  // shifting the working cost.
  bool make_dual_feasible() {
    bool moved = false;
    for (int j = 0; j < total_; ++j) {
      if (pos_[j] >= 0 || lo_[j] == up_[j]) continue;
      const bool upper = at_upper_[j] != 0;
      if (!upper && d_[j] < -kDualTol) {
        if (std::isfinite(up_[j])) {
          place_nonbasic(j, true);
          moved = true;
        } else if (d_[j] > -1e-6) {
          cost_[j] -= d_[j];
          d_[j] = 0.0;
        } else {
          return false;
        }
      } else if (upper && d_[j] > kDualTol) {
        if (std::isfinite(lo_[j])) {
          place_nonbasic(j, false);
          moved = true;
        } else if (d_[j] < 1e-6) {
          cost_[j] -= d_[j];
          d_[j] = 0.0;
        } else {
          return false;
        }
      }
    }
    if (moved) recompute_primal();
    return true;
  }

  int choose_leaving(bool bland) const {
    int best_r = -1;
    double best = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int j = basic_[i];
      double infeas = 0.0;
      if (x_[j] < lo_[j] - kPrimalTol * (1.0 + std::abs(lo_[j]))) {
        infeas = lo_[j] - x_[j];
      } else if (x_[j] > up_[j] + kPrimalTol * (1.0 + std::abs(up_[j]))) {
        infeas = x_[j] - up_[j];
      }
      if (infeas <= 0.0) continue;
      if (bland) {
        if (best_r < 0 || j < basic_[best_r]) best_r = i;
      } else if (infeas > best) {
        best = infeas;
        best_r = i;
      }
    }
    return best_r;
  }

  // alpha_j = rho' a_j for the nonbasic, non-fixed variables, row-wise over
  // the nonzeros of rho. touched_ lists the entries set, ascending.
  void pivot_row(const std::vector<double>& rho) {
    for (int j : touched_) {
      alpha_[j] = 0.0;
      touched_flag_[j] = 0;
    }
    touched_.clear();
    auto touch = [&](int j) {
      if (!touched_flag_[j]) {
        touched_flag_[j] = 1;
        touched_.push_back(j);
      }
    };
    for (int r = 0; r < m_; ++r) {
      const double pr = rho[r];
      if (pr == 0.0) continue;
      for (const auto& [j, v] : rows_[r]) {
        if (pos_[j] >= 0 || lo_[j] == up_[j]) continue;
        alpha_[j] += v * pr;
        touch(j);
      }
      const int s = n_ + r;
      if (pos_[s] < 0 && lo_[s] != up_[s]) {
        alpha_[s] = -pr;
        touch(s);
      }
    }
    std::sort(touched_.begin(), touched_.end());
  }

  // dx_leaving = -alpha_j dx_j. Candidates move the leaving variable toward
  // its violated bound. Outside Bland mode this is a bound-flipping ratio
  // test: boxed candidates whose breakpoint is passed while the leaving
  // variable stays infeasible go to flips_ and move to their other bound.
  int choose_entering(bool going_up, bool bland, double delta) {
    auto eligible = [&](int j) {
      const double a = alpha_[j];
      if (std::abs(a) <= kPivotTol) return false;
      const bool free = !std::isfinite(lo_[j]) && !std::isfinite(up_[j]);
      if (free) return true;
      const bool can_increase = at_upper_[j] == 0;
      return going_up ? (can_increase ? a < 0.0 : a > 0.0) : (can_increase ? a > 0.0 : a < 0.0);
    };
    auto slack_of = [&](int j) {
      return at_upper_[j] == 0 ? std::max(d_[j], 0.0) : std::max(-d_[j], 0.0);
    };

    candidates_.clear();
    for (int j : touched_) {
      if (eligible(j)) candidates_.push_back({slack_of(j) / std::abs(alpha_[j]), j});
    }
    if (candidates_.empty()) return -1;

    if (bland) {
      int best = -1;
      double best_ratio = kInf;
      for (const auto& [ratio, j] : candidates_) {
        if (ratio < best_ratio) {
          best_ratio = ratio;
          best = j;
        }
      }
      return best;
    }

    std::sort(candidates_.begin(), candidates_.end());
    double slope = delta;
    std::size_t k = 0;
    for (; k < candidates_.size(); ++k) {
      const int j = candidates_[k].second;
      const double range = up_[j] - lo_[j];
      if (!std::isfinite(range)) break;
      const double drop = std::abs(alpha_[j]) * range;
      if (slope - drop <= kPrimalTol) break;
      slope -= drop;
      flips_.push_back(j);
    }
    if (k == candidates_.size()) {
      flips_.clear();
      return -1;
    }

    // Harris pass over the remaining candidates: within the relaxed bound,
    // take the largest pivot.
    double bound = kInf;
    for (std::size_t i = k; i < candidates_.size(); ++i) {
      const int j = candidates_[i].second;
      bound = std::min(bound, (slack_of(j) + kDualTol) / std::abs(alpha_[j]));
      if (candidates_[i].first > bound) break;
    }
    int best = -1;
    double best_alpha = 0.0;
    for (std::size_t i = k; i < candidates_.size() && candidates_[i].first <= bound; ++i) {
      const int j = candidates_[i].second;
      if (std::abs(alpha_[j]) > best_alpha) {
        best_alpha = std::abs(alpha_[j]);
        best = j;
      }
    }
    return best;
  }

  // Moves every variable in flips_ to its other bound and updates the basic
  // values.
  void apply_flips() {
    std::vector<double> shift(m_, 0.0);
    for (int j : flips_) {
      const double to = at_upper_[j] ? lo_[j] : up_[j];
      const double step = to - x_[j];
      for (const auto& [row, v] : column(j)) shift[row] += v * step;
      x_[j] = to;
      at_upper_[j] = at_upper_[j] ? 0 : 1;
    }
    ftran(shift);
    for (int i = 0; i < m_; ++i) {
      if (shift[i] != 0.0) x_[basic_[i]] -= shift[i];
    }
  }

  // min over the box of (c - [A -I]' y)' z, with y from the true costs.
  double lagrangian_bound() const {
    std::vector<double> true_cost(total_, 0.0);
    for (int j = 0; j < n_; ++j) true_cost[j] = lp_.cost[j];
    const auto y = duals(true_cost);
    long double bound = 0.0L;
    for (int j = 0; j < total_; ++j) {
      double d = true_cost[j];
      for (const auto& [row, v] : column(j)) d -= v * y[row];
      if (d == 0.0) continue;
      const double at = d > 0.0 ? lo_[j] : up_[j];
      if (!std::isfinite(at)) {
        if (std::abs(d) <= kDualTol) continue;
        return -kInf;
      }
      bound += static_cast<long double>(d) * at;
    }
    return static_cast<double>(bound);
  }

  const LpProblem& lp_;
  int m_, n_, total_;
  std::vector<double> lo_, up_, cost_;
  std::vector<int> basic_, pos_;
  std::vector<char> at_upper_;
  std::vector<double> x_, d_, alpha_;
  std::vector<int> touched_;
  std::vector<int> flips_;
  std::vector<std::pair<double, int>> candidates_;
  std::vector<char> touched_flag_;
  std::vector<Eta> etas_;
  std::vector<std::vector<std::pair<int, double>>> slack_columns_;
  std::vector<std::vector<std::pair<int, double>>> rows_;  // structural entries per row
  // Snapshot of the factorized basis.
  std::vector<int> structural_pos_;  // basis positions holding structural columns
  std::vector<int> structural_col_;  // the column at each of those positions
  std::vector<int> slack_pos_;       // row -> basis position of its basic slack, or -1
  std::vector<int> block_rows_;      // rows whose slack is nonbasic
  std::vector<int> block_index_;     // row -> index in block_rows_, or -1
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace

LpResult solve_lp(const LpProblem& lp, const LpBasis* warm, long max_iterations,
                  std::optional<Deadline> deadline) {
  if (static_cast<int>(lp.columns.size()) != lp.cols ||
      static_cast<int>(lp.row_lower.size()) != lp.rows) {
    throw InvalidInput("LP dimensions are inconsistent");
  }
  return DualSimplex(lp).run(warm, max_iterations, deadline);
}

}  // namespace donorplan
