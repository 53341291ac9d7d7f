#pragma once

// Textbook two-phase tableau simplex with Bland's rule throughout. Shares
// nothing with the production engine beyond the LpProblem struct; used only
// as a cross-check oracle in tests.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mats/simplex.hpp"

namespace mats::oracle {

struct TableauResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

inline TableauResult dense_tableau_solve(const LpProblem& p) {
  constexpr double eps = 1e-9;
  const int n = p.num_cols;
  struct Row {
    std::vector<double> a;
    int sense;  // -1 <=, 0 =, 1 >=
    double b;
  };
  std::vector<Row> rows;
  for (const LpRow& r : p.rows) {
    Row row{std::vector<double>(n, 0.0), 0, r.rhs};
    for (const auto& [c, v] : r.coeffs) row.a[c] += v;
    row.sense = r.sense == Sense::LessEqual ? -1 : (r.sense == Sense::GreaterEqual ? 1 : 0);
    for (int j = 0; j < n; ++j) row.b -= row.a[j] * p.lower[j];
    rows.push_back(std::move(row));
  }
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(p.lower[j])) throw std::invalid_argument("oracle needs finite lower bounds");
    if (std::isfinite(p.upper[j])) {
      Row row{std::vector<double>(n, 0.0), -1, p.upper[j] - p.lower[j]};
      row.a[j] = 1.0;
      rows.push_back(std::move(row));
    }
  }
  for (Row& r : rows)
    if (r.b < 0) {
      for (double& v : r.a) v = -v;
      r.b = -r.b;
      r.sense = -r.sense;
    }

  const int m = static_cast<int>(rows.size());
  int n_slack = 0, n_art = 0;
  for (const Row& r : rows) {
    if (r.sense != 0) ++n_slack;
    if (r.sense >= 0) ++n_art;
  }
  const int cols = n + n_slack + n_art;  // last column is rhs
  std::vector<std::vector<double>> T(m, std::vector<double>(cols + 1, 0.0));
  std::vector<int> basis(m);
  std::vector<bool> artificial(cols, false);
  int s = n, a = n + n_slack;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) T[i][j] = rows[i].a[j];
    T[i][cols] = rows[i].b;
    if (rows[i].sense == -1) {
      T[i][s] = 1.0;
      basis[i] = s++;
    } else {
      if (rows[i].sense == 1) T[i][s++] = -1.0;
      T[i][a] = 1.0;
      artificial[a] = true;
      basis[i] = a++;
    }
  }

  auto run = [&](const std::vector<double>& c, const std::vector<bool>& blocked) -> LpStatus {
    for (long iter = 0; iter < 1000000; ++iter) {
      int enter = -1;
      for (int j = 0; j < cols && enter < 0; ++j) {
        if (blocked[j]) continue;
        bool basic = false;
        for (int b : basis) basic |= b == j;
        if (basic) continue;
        double d = c[j];
        for (int i = 0; i < m; ++i) d -= c[basis[i]] * T[i][j];
        if (d < -eps) enter = j;
      }
      if (enter < 0) return LpStatus::Optimal;
      int leave = -1;
      double best = 0.0;
      for (int i = 0; i < m; ++i) {
        if (T[i][enter] <= eps) continue;
        const double ratio = T[i][cols] / T[i][enter];
        if (leave < 0 || ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return LpStatus::Unbounded;
      const double piv = T[leave][enter];
      for (double& v : T[leave]) v /= piv;
      for (int i = 0; i < m; ++i) {
        if (i == leave || T[i][enter] == 0.0) continue;
        const double f = T[i][enter];
        for (int j = 0; j <= cols; ++j) T[i][j] -= f * T[leave][j];
      }
      basis[leave] = enter;
    }
    return LpStatus::IterationLimit;
  };

  TableauResult out;
  std::vector<double> c1(cols, 0.0);
  for (int j = 0; j < cols; ++j)
    if (artificial[j]) c1[j] = 1.0;
  run(c1, std::vector<bool>(cols, false));
  double infeas = 0.0;
  for (int i = 0; i < m; ++i)
    if (artificial[basis[i]]) infeas += T[i][cols];
  if (infeas > 1e-7) return out;

  // Pivot remaining zero-level artificials out where possible.
  for (int i = 0; i < m; ++i) {
    if (!artificial[basis[i]]) continue;
    for (int j = 0; j < n + n_slack; ++j)
      if (std::abs(T[i][j]) > eps) {
        const double piv = T[i][j];
        for (double& v : T[i]) v /= piv;
        for (int r = 0; r < m; ++r) {
          if (r == i || T[r][j] == 0.0) continue;
          const double f = T[r][j];
          for (int k = 0; k <= cols; ++k) T[r][k] -= f * T[i][k];
        }
        basis[i] = j;
        break;
      }
  }

  std::vector<double> c2(cols, 0.0);
  for (int j = 0; j < n; ++j) c2[j] = p.cost[j];
  out.status = run(c2, artificial);
  if (out.status != LpStatus::Optimal) return out;
  out.x = p.lower;
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] += T[i][cols];
  for (int j = 0; j < n; ++j) out.objective += p.cost[j] * out.x[j];
  return out;
}

}  // namespace mats::oracle
