#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mats {

enum class Sense { LessEqual, GreaterEqual, Equal };

struct LpRow {
  std::vector<std::pair<int, double>> coeffs;  // (column, value)
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

// min c'x  s.t.  rows, lower <= x <= upper. Lower bounds may be -inf and
// upper bounds +inf.
struct LpProblem {
  int num_cols = 0;
  std::vector<LpRow> rows;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> cost;

  // Empty iff dimensions agree and lower <= upper everywhere.
  std::vector<std::string> problems() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus s);

// Basis snapshot for warm starts: which variable sits at each basis
// position, and for nonbasic variables whether they rest at the upper bound.
// Variables 0..n-1 are columns, n..n+m-1 are row logicals.
struct LpBasis {
  std::vector<int> head;
  std::vector<std::uint8_t> at_upper;

  bool empty() const { return head.empty(); }
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
  LpBasis basis;
};

struct LpOptions {
  double tol = 1e-6;          // reduced-cost optimality and reported feasibility
  double primal_tol = 1e-9;   // internal bound feasibility on scaled rows
  double pivot_tol = 1e-9;
  long max_iters = 200000;
  int degenerate_stall = 50;  // consecutive degenerate pivots before Bland's rule
  int refactor_every = 64;
};

// Two-phase bounded-variable primal simplex. Rows are equilibrated by their
// largest coefficient, which tames big-M rows. Phase 1 minimizes the sum of
// bound infeasibilities from the starting basis, so any basis (including a
// parent's in branch-and-bound) is a valid starting point.
//
// Pricing is Dantzig (most improving reduced cost, lowest index on ties);
// the ratio test takes the minimum ratio, lowest variable index on ties.
// After `degenerate_stall` consecutive zero-length steps Bland's rule takes
// over until the next non-degenerate step.
//
// The basis matrix is handled through its structural kernel: rows whose
// logical is basic drop out, leaving a dense square block over the basic
// columns, factorized with partial pivoting and updated in product form.
class LpSolver {
 public:
  explicit LpSolver(const LpProblem& problem, LpOptions opts = {});

  // Solves with replacement column bounds. Throws SolverError on a singular
  // basis factorization.
  LpResult solve(const std::vector<double>& lower, const std::vector<double>& upper,
                 const LpBasis* warm = nullptr) const;
  LpResult solve(const LpBasis* warm = nullptr) const;

  int num_cols() const { return n_; }
  int num_rows() const { return m_; }

 private:
  friend struct SimplexRun;

  LpOptions opts_;
  int n_ = 0;
  int m_ = 0;
  std::vector<double> row_scale_;
  std::vector<int> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;  // scaled
  std::vector<double> row_lower_;  // scaled logical bounds
  std::vector<double> row_upper_;
  std::vector<double> cost_;
  std::vector<double> base_lower_;
  std::vector<double> base_upper_;
};

LpResult solve_lp(const LpProblem& p, const LpOptions& opts = {});

// max_r violation of rows and bounds by x (unscaled), 0 if feasible.
double max_violation(const LpProblem& p, const std::vector<double>& x);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace mats
