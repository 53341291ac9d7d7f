#include "mats/simplex.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mats/error.hpp"

namespace mats {

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

std::vector<std::string> LpProblem::problems() const {
  std::vector<std::string> out;
  const auto n = static_cast<size_t>(num_cols);
  if (lower.size() != n || upper.size() != n || cost.size() != n)
    out.push_back("bound/cost vectors must have num_cols entries");
  for (size_t j = 0; j < std::min({n, lower.size(), upper.size()}); ++j)
    if (!(lower[j] <= upper[j]) || lower[j] == kInfinity || upper[j] == -kInfinity)
      out.push_back(fmt::format("column {}: bounds [{}, {}] are empty", j, lower[j], upper[j]));
  for (size_t r = 0; r < rows.size(); ++r)
    for (const auto& [c, v] : rows[r].coeffs)
      if (c < 0 || c >= num_cols || !std::isfinite(v))
        out.push_back(fmt::format("row {}: bad entry ({}, {})", r, c, v));
  return out;
}

LpSolver::LpSolver(const LpProblem& p, LpOptions opts) : opts_(opts), n_(p.num_cols), m_(int(p.rows.size())) {
  if (auto bad = p.problems(); !bad.empty()) throw DimensionMismatch("LpProblem: " + bad.front());
  row_scale_.assign(m_, 1.0);
  for (int r = 0; r < m_; ++r) {
    double big = 0.0;
    for (const auto& [c, v] : p.rows[r].coeffs) big = std::max(big, std::abs(v));
    if (big > 0.0) row_scale_[r] = 1.0 / big;
  }
  // Column-major copy of the scaled matrix; duplicate entries are summed.
  std::vector<std::vector<std::pair<int, double>>> cols(n_);
  for (int r = 0; r < m_; ++r)
    for (const auto& [c, v] : p.rows[r].coeffs) {
      auto& col = cols[c];
      if (!col.empty() && col.back().first == r)
        col.back().second += v * row_scale_[r];
      else
        col.emplace_back(r, v * row_scale_[r]);
    }
  col_start_.assign(n_ + 1, 0);
  for (int j = 0; j < n_; ++j) {
    col_start_[j + 1] = col_start_[j];
    for (const auto& [r, v] : cols[j])
      if (v != 0.0) {
        col_row_.push_back(r);
        col_val_.push_back(v);
        ++col_start_[j + 1];
      }
  }
  row_lower_.resize(m_);
  row_upper_.resize(m_);
  for (int r = 0; r < m_; ++r) {
    const double b = p.rows[r].rhs * row_scale_[r];
    switch (p.rows[r].sense) {
      case Sense::LessEqual: row_lower_[r] = -kInfinity; row_upper_[r] = b; break;
      case Sense::GreaterEqual: row_lower_[r] = b; row_upper_[r] = kInfinity; break;
      case Sense::Equal: row_lower_[r] = b; row_upper_[r] = b; break;
    }
  }
  cost_ = p.cost;
  base_lower_ = p.lower;
  base_upper_ = p.upper;
}

// Mutable state of one solve.
struct SimplexRun {
  const LpSolver& lp;
  const LpOptions& o;
  int n, m, N;
  std::vector<double> lb, ub, cost, x;
  std::vector<int> head, pos;  // pos[var] = basis position or -1

  // Base factorization of the basis kernel.
  std::vector<int> kernel_rows;   // uncovered rows
  std::vector<int> kernel_pos;    // structural basis positions
  std::vector<int> row_in_kernel; // row -> index in kernel_rows or -1
  std::vector<int> logical_pos;   // row -> basis position of its basic logical or -1
  std::vector<int> base_head;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  struct Eta {
    int p;
    std::vector<double> alpha;
  };
  std::vector<Eta> etas;

  SimplexRun(const LpSolver& s, const std::vector<double>& lower, const std::vector<double>& upper)
      : lp(s), o(s.opts_), n(s.n_), m(s.m_), N(s.n_ + s.m_) {
    lb.resize(N);
    ub.resize(N);
    cost.assign(N, 0.0);
    for (int j = 0; j < n; ++j) {
      lb[j] = lower[j];
      ub[j] = upper[j];
      cost[j] = s.cost_[j];
    }
    for (int r = 0; r < m; ++r) {
      lb[n + r] = s.row_lower_[r];
      ub[n + r] = s.row_upper_[r];
    }
    x.assign(N, 0.0);
  }

  bool is_logical(int var) const { return var >= n; }

  template <class F>
  void for_column(int var, F&& f) const {
    if (is_logical(var)) {
      f(var - n, -1.0);
      return;
    }
    for (int e = lp.col_start_[var]; e < lp.col_start_[var + 1]; ++e) f(lp.col_row_[e], lp.col_val_[e]);
  }

  double resting_value(int var, bool at_upper) const {
    if (at_upper && std::isfinite(ub[var])) return ub[var];
    if (std::isfinite(lb[var])) return lb[var];
    if (std::isfinite(ub[var])) return ub[var];
    return 0.0;
  }

  void slack_basis() {
    head.resize(m);
    pos.assign(N, -1);
    for (int r = 0; r < m; ++r) {
      head[r] = n + r;
      pos[n + r] = r;
    }
    for (int j = 0; j < n; ++j) x[j] = resting_value(j, false);
  }

  bool load_basis(const LpBasis& b) {
    if (static_cast<int>(b.head.size()) != m || static_cast<int>(b.at_upper.size()) != N) return false;
    head = b.head;
    pos.assign(N, -1);
    for (int p = 0; p < m; ++p) {
      if (head[p] < 0 || head[p] >= N || pos[head[p]] != -1) return false;
      pos[head[p]] = p;
    }
    for (int j = 0; j < N; ++j)
      if (pos[j] < 0) x[j] = resting_value(j, b.at_upper[j] != 0);
    return true;
  }

  // Returns false when the kernel is singular.
  bool factor() {
    etas.clear();
    base_head = head;
    logical_pos.assign(m, -1);
    kernel_pos.clear();
    for (int p = 0; p < m; ++p) {
      if (is_logical(head[p]))
        logical_pos[head[p] - n] = p;
      else
        kernel_pos.push_back(p);
    }
    kernel_rows.clear();
    row_in_kernel.assign(m, -1);
    for (int r = 0; r < m; ++r)
      if (logical_pos[r] < 0) {
        row_in_kernel[r] = static_cast<int>(kernel_rows.size());
        kernel_rows.push_back(r);
      }
    const int k = static_cast<int>(kernel_pos.size());
    if (static_cast<int>(kernel_rows.size()) != k) return false;
    if (k == 0) return true;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k, k);
    for (int b = 0; b < k; ++b)
      for_column(head[kernel_pos[b]], [&](int r, double v) {
        if (row_in_kernel[r] >= 0) K(row_in_kernel[r], b) = v;
      });
    lu.compute(K);
    const auto& U = lu.matrixLU();
    double big = 0.0, small = kInfinity;
    for (int i = 0; i < k; ++i) {
      big = std::max(big, std::abs(U(i, i)));
      small = std::min(small, std::abs(U(i, i)));
    }
    return small > 1e-11 * std::max(1.0, big);
  }

  // Solve B z = a (a indexed by row, z by basis position).
  std::vector<double> ftran(const std::vector<double>& a) const {
    std::vector<double> z(m, 0.0);
    const int k = static_cast<int>(kernel_pos.size());
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (int i = 0; i < k; ++i) rhs[i] = a[kernel_rows[i]];
      const Eigen::VectorXd zs = lu.solve(rhs);
      for (int i = 0; i < k; ++i) z[kernel_pos[i]] = zs[i];
    }
    std::vector<double> acc(m, 0.0);
    for (int i = 0; i < k; ++i) {
      const double zi = z[kernel_pos[i]];
      if (zi == 0.0) continue;
      for_column(base_head[kernel_pos[i]], [&](int r, double v) {
        if (logical_pos[r] >= 0) acc[r] += v * zi;
      });
    }
    for (int r = 0; r < m; ++r)
      if (logical_pos[r] >= 0) z[logical_pos[r]] = acc[r] - a[r];
    for (const Eta& e : etas) {
      const double t = z[e.p] / e.alpha[e.p];
      if (t != 0.0)
        for (int i = 0; i < m; ++i) z[i] -= e.alpha[i] * t;
      z[e.p] = t;
    }
    return z;
  }

  // Solve y' B = c' (c indexed by basis position, y by row).
  std::vector<double> btran(std::vector<double> c) const {
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double s = c[it->p];
      for (int i = 0; i < m; ++i)
        if (i != it->p) s -= c[i] * it->alpha[i];
      c[it->p] = s / it->alpha[it->p];
    }
    std::vector<double> y(m, 0.0);
    for (int r = 0; r < m; ++r)
      if (logical_pos[r] >= 0) y[r] = -c[logical_pos[r]];
    const int k = static_cast<int>(kernel_pos.size());
    if (k > 0) {
      Eigen::VectorXd rhs(k);
      for (int i = 0; i < k; ++i) {
        double s = c[kernel_pos[i]];
        for_column(base_head[kernel_pos[i]], [&](int r, double v) {
          if (logical_pos[r] >= 0) s -= v * y[r];
        });
        rhs[i] = s;
      }
      const Eigen::VectorXd yr = lu.transpose().solve(rhs);
      for (int i = 0; i < k; ++i) y[kernel_rows[i]] = yr[i];
    }
    return y;
  }

  void recompute_basics() {
    std::vector<double> rhs(m, 0.0);
    for (int j = 0; j < N; ++j) {
      if (pos[j] >= 0 || x[j] == 0.0) continue;
      const double xj = x[j];
      for_column(j, [&](int r, double v) { rhs[r] -= v * xj; });
    }
    const auto xb = ftran(rhs);
    for (int p = 0; p < m; ++p) x[head[p]] = xb[p];
  }

  double infeasibility(int var) const {
    if (x[var] < lb[var] - o.primal_tol) return lb[var] - x[var];
    if (x[var] > ub[var] + o.primal_tol) return x[var] - ub[var];
    return 0.0;
  }

  bool primal_feasible() const {
    for (int p = 0; p < m; ++p)
      if (infeasibility(head[p]) > 0.0) return false;
    return true;
  }
};

LpResult LpSolver::solve(const LpBasis* warm) const { return solve(base_lower_, base_upper_, warm); }

LpResult LpSolver::solve(const std::vector<double>& lower, const std::vector<double>& upper,
                         const LpBasis* warm) const {
  SimplexRun s(*this, lower, upper);
  const int N = s.N;
  const int m = s.m;
  if (!(warm && s.load_basis(*warm) && s.factor())) {
    s.slack_basis();
    if (!s.factor()) throw SolverError("slack basis failed to factorize");
  }
  s.recompute_basics();

  LpResult res;
  int degenerate = 0;
  bool bland = false;
  const double dtol = opts_.tol;
  std::vector<double> cb(m), a(m);

  while (true) {
    if (res.iterations >= opts_.max_iters) {
      res.status = LpStatus::IterationLimit;
      break;
    }
    const bool phase1 = !s.primal_feasible();
    for (int p = 0; p < m; ++p) {
      const int v = s.head[p];
      if (phase1) {
        cb[p] = s.x[v] < s.lb[v] - opts_.primal_tol ? -1.0 : (s.x[v] > s.ub[v] + opts_.primal_tol ? 1.0 : 0.0);
      } else {
        cb[p] = s.cost[v];
      }
    }
    const auto y = s.btran(cb);

    // Pricing.
    int enter = -1;
    double best = 0.0;
    int dir = 0;
    for (int j = 0; j < N; ++j) {
      if (s.pos[j] >= 0 || s.lb[j] == s.ub[j]) continue;
      double d = phase1 ? 0.0 : s.cost[j];
      s.for_column(j, [&](int r, double v) { d -= y[r] * v; });
      int jdir = 0;
      const bool free = !std::isfinite(s.lb[j]) && !std::isfinite(s.ub[j]);
      const bool at_lower = std::isfinite(s.lb[j]) && s.x[j] == s.lb[j];
      if (free ? d < -dtol : (at_lower && d < -dtol)) jdir = 1;
      if (free ? d > dtol : (!at_lower && d > dtol)) jdir = -1;
      if (jdir == 0) continue;
      if (bland) {
        enter = j;
        dir = jdir;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        enter = j;
        dir = jdir;
      }
    }
    if (enter < 0) {
      if (!s.etas.empty()) {
        // Confirm on a fresh factorization before declaring the outcome.
        if (!s.factor()) throw SolverError("basis became singular");
        s.recompute_basics();
        if (s.primal_feasible() == !phase1) {
          res.status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
          break;
        }
        continue;
      }
      res.status = phase1 ? LpStatus::Infeasible : LpStatus::Optimal;
      break;
    }

    std::fill(a.begin(), a.end(), 0.0);
    s.for_column(enter, [&](int r, double v) { a[r] = v; });
    const auto alpha = s.ftran(a);

    // Ratio test. Basic variable at position p moves at rate -dir*alpha[p].
    double theta = s.ub[enter] - s.lb[enter];  // bound flip
    if (!std::isfinite(theta)) theta = kInfinity;
    int leave = -1;
    double leave_target = 0.0;
    for (int p = 0; p < m; ++p) {
      if (std::abs(alpha[p]) <= opts_.pivot_tol) continue;
      const double rate = -dir * alpha[p];
      const int v = s.head[p];
      const double xv = s.x[v];
      double limit = kInfinity;
      double target = 0.0;
      if (rate > 0.0) {
        if (phase1 && xv < s.lb[v] - opts_.primal_tol) {
          limit = (s.lb[v] - xv) / rate;
          target = s.lb[v];
        } else if (std::isfinite(s.ub[v]) && !(phase1 && xv > s.ub[v] + opts_.primal_tol)) {
          limit = std::max(0.0, s.ub[v] - xv) / rate;
          target = s.ub[v];
        }
      } else {
        if (phase1 && xv > s.ub[v] + opts_.primal_tol) {
          limit = (xv - s.ub[v]) / -rate;
          target = s.ub[v];
        } else if (std::isfinite(s.lb[v]) && !(phase1 && xv < s.lb[v] - opts_.primal_tol)) {
          limit = std::max(0.0, xv - s.lb[v]) / -rate;
          target = s.lb[v];
        }
      }
      if (limit < theta - 1e-12) {
        theta = limit;
        leave = p;
        leave_target = target;
      } else if (leave >= 0 && limit <= theta + 1e-12 && v < s.head[leave]) {
        theta = std::min(theta, limit);
        leave = p;
        leave_target = target;
      }
    }
    if (!std::isfinite(theta)) {
      if (phase1) throw SolverError("phase 1 ray without a breakpoint");
      res.status = LpStatus::Unbounded;
      break;
    }

    ++res.iterations;
    if (theta <= 1e-12) {
      if (++degenerate > opts_.degenerate_stall) bland = true;
    } else {
      degenerate = 0;
      bland = false;
    }

    s.x[enter] += dir * theta;
    for (int p = 0; p < m; ++p)
      if (alpha[p] != 0.0) s.x[s.head[p]] -= dir * theta * alpha[p];

    if (leave < 0) {
      // Bound flip: the entering variable crosses to its other bound.
      s.x[enter] = dir > 0 ? s.ub[enter] : s.lb[enter];
      continue;
    }
    const int out = s.head[leave];
    s.x[out] = leave_target;
    s.pos[out] = -1;
    s.head[leave] = enter;
    s.pos[enter] = leave;
    s.etas.push_back({leave, alpha});
    if (static_cast<int>(s.etas.size()) >= opts_.refactor_every) {
      if (!s.factor()) throw SolverError("basis became singular");
      s.recompute_basics();
    }
  }

  res.x.assign(s.x.begin(), s.x.begin() + n_);
  res.objective = 0.0;
  for (int j = 0; j < n_; ++j) res.objective += cost_[j] * res.x[j];
  res.basis.head = s.head;
  res.basis.at_upper.assign(N, 0);
  for (int j = 0; j < N; ++j)
    if (s.pos[j] < 0 && std::isfinite(s.ub[j]) && s.x[j] == s.ub[j] && s.lb[j] != s.ub[j]) res.basis.at_upper[j] = 1;
  return res;
}

LpResult solve_lp(const LpProblem& p, const LpOptions& opts) { return LpSolver(p, opts).solve(); }

double max_violation(const LpProblem& p, const std::vector<double>& x) {
  double worst = 0.0;
  for (int j = 0; j < p.num_cols; ++j) {
    if (!std::isfinite(x[j])) return kInfinity;
    worst = std::max({worst, p.lower[j] - x[j], x[j] - p.upper[j]});
  }
  for (const LpRow& row : p.rows) {
    double act = 0.0;
    for (const auto& [c, v] : row.coeffs) act += v * x[c];
    if (row.sense != Sense::GreaterEqual) worst = std::max(worst, act - row.rhs);
    if (row.sense != Sense::LessEqual) worst = std::max(worst, row.rhs - act);
  }
  return worst;
}

}  // namespace mats
