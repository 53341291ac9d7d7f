#include "mats/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <fmt/format.h>

#include "mats/error.hpp"

namespace mats {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CandidateSchedule CandidateSchedule::from_orders(int num_tasks, std::vector<std::vector<int>> orders) {
  CandidateSchedule c;
  c.assignment = Grid<int>(static_cast<int>(orders.size()), num_tasks, 0);
  for (size_t i = 0; i < orders.size(); ++i)
    for (int k : orders[i])
      if (k >= 0 && k < num_tasks) c.assignment(static_cast<int>(i), k) = 1;
  c.orders = std::move(orders);
  return c;
}

int CandidateSchedule::agent_of(int k) const {
  for (int i = 0; i < assignment.rows(); ++i)
    if (assignment(i, k) != 0) return i;
  return -1;
}

std::vector<std::string> CandidateSchedule::problems() const {
  std::vector<std::string> out;
  const int na = num_agents();
  const int nt = num_tasks();
  if (assignment.rows() != na) {
    out.push_back(fmt::format("assignment has {} rows for {} order lists", assignment.rows(), na));
    return out;
  }
  std::vector<int> seen(nt, 0);
  for (int i = 0; i < na; ++i) {
    for (int k : orders[i]) {
      if (k < 0 || k >= nt) {
        out.push_back(fmt::format("agent {} lists unknown task {}", i, k));
        continue;
      }
      ++seen[k];
      if (assignment(i, k) != 1) out.push_back(fmt::format("task {} ordered for agent {} but not assigned", k, i));
    }
    for (int k = 0; k < nt; ++k)
      if (assignment(i, k) == 1 && std::find(orders[i].begin(), orders[i].end(), k) == orders[i].end())
        out.push_back(fmt::format("task {} assigned to agent {} but missing from its order", k, i));
  }
  for (int k = 0; k < nt; ++k) {
    int col = 0;
    for (int i = 0; i < na; ++i) col += assignment(i, k);
    if (seen[k] != 1 || col != 1) out.push_back(fmt::format("task {} must be assigned exactly once", k));
  }
  return out;
}

int TimedSchedule::num_feasible() const {
  return static_cast<int>(std::count(feasible.begin(), feasible.end(), true));
}

bool TimedSchedule::all_feasible() const {
  return std::all_of(feasible.begin(), feasible.end(), [](bool f) { return f; });
}

TimedSchedule simulate(const Instance& inst, const TravelTimes& tt, const CandidateSchedule& cand) {
  const int nt = inst.num_tasks();
  TimedSchedule ts;
  ts.candidate = cand;
  ts.arrival.assign(nt, kInf);
  ts.start.assign(nt, kInf);
  ts.finish.assign(nt, kInf);
  ts.feasible.assign(nt, false);
  ts.horizon = inst.horizon();

  // Combined dependency graph: immediate agent successors + order constraints.
  std::vector<int> owner(nt, -1), prev(nt, -1), indeg(nt, 0);
  std::vector<std::vector<int>> succ(nt);
  for (int i = 0; i < cand.num_agents(); ++i) {
    const auto& seq = cand.orders[i];
    for (size_t p = 0; p < seq.size(); ++p) {
      owner[seq[p]] = i;
      if (p > 0) {
        prev[seq[p]] = seq[p - 1];
        succ[seq[p - 1]].push_back(seq[p]);
        ++indeg[seq[p]];
      }
    }
  }
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (j != k && inst.precedence(j, k) != 0) {
        succ[j].push_back(k);
        ++indeg[k];
      }

  // Kahn's algorithm, lowest task id first. Tasks never released sit on or
  // behind a cycle and keep their +inf sentinel.
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int k = 0; k < nt; ++k)
    if (indeg[k] == 0) ready.push(k);
  while (!ready.empty()) {
    const int k = ready.top();
    ready.pop();
    const int i = owner[k];
    if (i >= 0) {
      const int j = prev[k];
      const double arrival = j < 0 ? tt.from_start(i, k) : ts.finish[j] + tt.between(i, j, k);
      double start = std::max(arrival, inst.tasks[k].window_start);
      for (int p = 0; p < nt; ++p)
        if (p != k && inst.precedence(p, k) != 0) start = std::max(start, ts.finish[p] + inst.wait(p, k));
      ts.arrival[k] = arrival;
      ts.start[k] = start;
      ts.finish[k] = start + inst.durations(i, k);
      ts.feasible[k] = ts.finish[k] <= inst.tasks[k].window_end;
    }
    for (int s : succ[k])
      if (--indeg[s] == 0) ready.push(s);
  }

  ts.makespan = 0.0;
  for (int k = 0; k < nt; ++k) ts.makespan = std::max(ts.makespan, ts.finish[k]);
  return ts;
}

double quality_score(const TimedSchedule& ts) {
  const double ms = std::clamp(ts.makespan, 0.0, ts.horizon);
  return ts.num_feasible() + (1.0 - ms / ts.horizon);
}

double r_score(const TimedSchedule& ts) {
  return quality_score(ts) / (static_cast<double>(ts.feasible.size()) + 1.0);
}

std::string to_string(ConstraintId id) { return fmt::format("C{}", static_cast<int>(id)); }

std::string ConstraintViolation::to_string() const {
  std::string s = mats::to_string(id);
  if (agent >= 0) s += fmt::format(" agent {}", agent);
  if (j >= 0) s += fmt::format(" task {}", j);
  if (k >= 0) s += fmt::format(" task {}", k);
  return s;
}

bool violates(const std::vector<ConstraintViolation>& v, ConstraintId id) {
  return std::any_of(v.begin(), v.end(), [&](const ConstraintViolation& c) { return c.id == id; });
}

std::vector<ConstraintViolation> check_constraints(const Instance& inst, const TravelTimes& tt,
                                                   const TimedSchedule& ts, double tol) {
  std::vector<ConstraintViolation> out;
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  const CandidateSchedule& cand = ts.candidate;
  if (cand.assignment.rows() != na || cand.assignment.cols() != nt || cand.num_agents() != na ||
      static_cast<int>(ts.finish.size()) != nt)
    throw DimensionMismatch("check_constraints: schedule does not match the instance");

  auto A = [&](int i, int k) { return cand.assignment(i, k) != 0; };
  // Position of every task in each agent's order, -1 if absent.
  Grid<int> pos(na, nt, -1);
  for (int i = 0; i < na; ++i)
    for (size_t p = 0; p < cand.orders[i].size(); ++p) {
      const int k = cand.orders[i][p];
      if (k >= 0 && k < nt) pos(i, k) = static_cast<int>(p);
    }
  auto S = [&](int i, int j, int k) { return pos(i, j) >= 0 && pos(i, k) >= 0 && pos(i, j) < pos(i, k); };
  // NaN-safe "a >= b - tol".
  auto geq = [&](double a, double b) { return a >= b - tol; };

  for (int k = 0; k < nt; ++k) {
    int count = 0;
    for (int i = 0; i < na; ++i) count += cand.assignment(i, k);
    if (count != 1) out.push_back({ConstraintId::C1, -1, -1, k});
  }
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = j + 1; k < nt; ++k) {
        const int s = int(S(i, j, k)) + int(S(i, k, j));
        if (s > int(A(i, j))) out.push_back({ConstraintId::C2, i, j, k});
        if (s > int(A(i, k))) out.push_back({ConstraintId::C3, i, j, k});
      }
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k)
        if (j != k && A(i, j) && A(i, k) && S(i, j, k) && !geq(ts.arrival[k], ts.finish[j] + tt.between(i, j, k)))
          out.push_back({ConstraintId::C4, i, j, k});
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k)
      if (A(i, k) && !geq(ts.arrival[k], tt.from_start(i, k))) out.push_back({ConstraintId::C5, i, -1, k});
  for (int k = 0; k < nt; ++k)
    if (!geq(ts.start[k], ts.arrival[k])) out.push_back({ConstraintId::C6, -1, -1, k});
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (j != k && inst.precedence(j, k) != 0 && !geq(ts.start[k], ts.finish[j] + inst.wait(j, k)))
        out.push_back({ConstraintId::C7, -1, j, k});
  for (int k = 0; k < nt; ++k)
    if (!geq(ts.start[k], inst.tasks[k].window_start)) out.push_back({ConstraintId::C8, -1, -1, k});
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k)
      if (A(i, k) && !geq(ts.finish[k], ts.start[k] + inst.durations(i, k)))
        out.push_back({ConstraintId::C9, i, -1, k});
  for (int k = 0; k < nt; ++k)
    if (!(ts.finish[k] <= inst.tasks[k].window_end + tol)) out.push_back({ConstraintId::C10, -1, -1, k});
  return out;
}

void save_schedule(const TimedSchedule& ts, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "task,agent,position,arrival,start,finish,feasible\n";
  const int nt = static_cast<int>(ts.finish.size());
  for (int k = 0; k < nt; ++k) {
    int agent = -1;
    int position = -1;
    for (int i = 0; i < ts.candidate.num_agents(); ++i) {
      const auto& seq = ts.candidate.orders[i];
      if (auto it = std::find(seq.begin(), seq.end(), k); it != seq.end()) {
        agent = i;
        position = static_cast<int>(it - seq.begin());
      }
    }
    out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{}\n", k, agent, position, ts.arrival[k], ts.start[k],
                       ts.finish[k], ts.feasible[k] ? 1 : 0);
  }
}

}  // namespace mats
