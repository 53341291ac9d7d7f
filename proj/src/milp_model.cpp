#include "mats/milp_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "mats/error.hpp"

namespace mats {

std::vector<int> MilpModel::binaries() const {
  std::vector<int> out;
  for (int v = 0; v < num_vars(); ++v)
    if (vars[v].kind == VarKind::Binary) out.push_back(v);
  return out;
}

LpProblem MilpModel::relaxation() const {
  LpProblem p;
  p.num_cols = num_vars();
  for (const Variable& v : vars) {
    p.lower.push_back(v.lower);
    p.upper.push_back(v.upper);
  }
  p.cost = objective;
  for (const ModelRow& r : rows) p.rows.push_back(r.row);
  return p;
}

std::vector<std::string> MilpModel::violations(const std::vector<double>& x, double tol) const {
  if (static_cast<int>(x.size()) != num_vars())
    throw DimensionMismatch(fmt::format("vector has {} entries, model has {} variables", x.size(), num_vars()));
  std::vector<std::string> out;
  for (int v = 0; v < num_vars(); ++v)
    if (!(x[v] >= vars[v].lower - tol && x[v] <= vars[v].upper + tol)) out.push_back("bound:" + vars[v].name);
  for (const ModelRow& r : rows) {
    double act = 0.0;
    for (const auto& [c, coef] : r.row.coeffs) act += coef * x[c];
    bool ok = true;
    switch (r.row.sense) {
      case Sense::LessEqual: ok = act <= r.row.rhs + tol; break;
      case Sense::GreaterEqual: ok = act >= r.row.rhs - tol; break;
      case Sense::Equal: ok = std::abs(act - r.row.rhs) <= tol; break;
    }
    if (!ok) out.push_back(r.tag);
  }
  return out;
}

namespace {

std::string lp_name(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '[' || c == ',') out += '_';
    else if (c != ']' && c != ':') out += c;
  }
  return out;
}

std::string lp_num(double v) { return fmt::format("{:.15g}", v); }

}  // namespace

void MilpModel::write_lp(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  auto terms = [&](const std::vector<std::pair<int, double>>& coeffs) {
    std::string s;
    for (const auto& [c, v] : coeffs) {
      s += fmt::format(" {} {} {}", v < 0 ? "-" : "+", lp_num(std::abs(v)), lp_name(vars[c].name));
    }
    return s.empty() ? std::string(" 0 ") + lp_name(vars[0].name) : s;
  };
  std::vector<std::pair<int, double>> obj;
  for (int v = 0; v < num_vars(); ++v)
    if (objective[v] != 0.0) obj.emplace_back(v, objective[v]);
  out << "\\ task allocation and scheduling MILP, big-M = " << lp_num(big_m) << "\n";
  out << "Minimize\n obj:" << terms(obj) << "\nSubject To\n";
  for (const ModelRow& r : rows) {
    const char* sense = r.row.sense == Sense::LessEqual ? "<=" : (r.row.sense == Sense::GreaterEqual ? ">=" : "=");
    out << ' ' << lp_name(r.tag) << ':' << terms(r.row.coeffs) << ' ' << sense << ' ' << lp_num(r.row.rhs) << '\n';
  }
  out << "Bounds\n";
  for (const Variable& v : vars) {
    if (v.kind == VarKind::Binary) continue;
    out << ' ' << lp_num(v.lower) << " <= " << lp_name(v.name);
    if (std::isfinite(v.upper)) out << " <= " << lp_num(v.upper);
    out << '\n';
  }
  out << "Binaries\n";
  for (const Variable& v : vars)
    if (v.kind == VarKind::Binary) out << ' ' << lp_name(v.name) << '\n';
  out << "End\n";
}

double big_m(const Instance& inst, const TravelTimes& tt) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  double m = inst.horizon();
  for (int k = 0; k < nt; ++k) {
    double longest = 0.0;
    for (int i = 0; i < na; ++i) longest = std::max(longest, inst.durations(i, k));
    m += longest;
  }
  // Pool of travel legs: start legs plus task-to-task legs.
  std::vector<double> legs(tt.from_start_times().data());
  double max_start = 0.0;
  for (double v : legs) max_start = std::max(max_start, v);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k)
        if (j != k) legs.push_back(tt.between(i, j, k));
  const auto take = std::min<size_t>(legs.size(), static_cast<size_t>(nt));
  std::partial_sort(legs.begin(), legs.begin() + static_cast<std::ptrdiff_t>(take), legs.end(), std::greater<>());
  for (size_t l = 0; l < take; ++l) m += legs[l];
  m += max_start;
  double max_wait = 0.0;
  for (double w : inst.wait.data()) max_wait = std::max(max_wait, w);
  return m + max_wait;
}

long expected_row_count(const Instance& inst) {
  const long na = inst.num_agents();
  const long nt = inst.num_tasks();
  long edges = 0;
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (j != k && inst.precedence(j, k) != 0) ++edges;
  return nt                              // C1
         + 3 * na * (nt * (nt - 1) / 2)  // C2, C3, SEQ
         + na * nt * (nt - 1)            // C4
         + na * nt                       // C5
         + nt                            // C6
         + edges                         // C7
         + na * nt                       // C9
         + nt;                           // makespan
}

MilpModel build(const Instance& inst, const TravelTimes& tt, ObjectiveKind objective) {
  return build(inst, tt, objective, big_m(inst, tt));
}

MilpModel build(const Instance& inst, const TravelTimes& tt, ObjectiveKind objective, double M) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  if (tt.num_agents() != na || tt.num_tasks() != nt)
    throw DimensionMismatch("build: travel times do not match the instance");
  MilpModel mdl;
  mdl.num_agents = na;
  mdl.num_tasks = nt;
  mdl.big_m = M;
  mdl.objective_kind = objective;

  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) mdl.vars.push_back({fmt::format("A[{},{}]", i, k), VarKind::Binary, 0.0, 1.0});
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k)
        if (j != k) mdl.vars.push_back({fmt::format("S[{},{},{}]", i, j, k), VarKind::Binary, 0.0, 1.0});
  for (int k = 0; k < nt; ++k) {
    const Task& t = inst.tasks[k];
    mdl.vars.push_back({fmt::format("tA[{}]", k), VarKind::Continuous, 0.0, kInfinity});
    mdl.vars.push_back({fmt::format("tS[{}]", k), VarKind::Continuous, t.window_start, kInfinity});  // C8
    mdl.vars.push_back({fmt::format("tF[{}]", k), VarKind::Continuous, 0.0, t.window_end});        // C10
  }
  mdl.vars.push_back({"t_ms", VarKind::Continuous, 0.0, kInfinity});

  auto add = [&](std::string tag, std::vector<std::pair<int, double>> coeffs, Sense sense, double rhs) {
    mdl.rows.push_back({std::move(tag), LpRow{std::move(coeffs), sense, rhs}});
  };

  for (int k = 0; k < nt; ++k) {
    std::vector<std::pair<int, double>> c;
    for (int i = 0; i < na; ++i) c.emplace_back(mdl.a(i, k), 1.0);
    add(fmt::format("C1[{}]", k), std::move(c), Sense::Equal, 1.0);
  }
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = j + 1; k < nt; ++k) {
        const int sjk = mdl.s(i, j, k), skj = mdl.s(i, k, j);
        add(fmt::format("C2[{},{},{}]", i, j, k), {{sjk, 1.0}, {skj, 1.0}, {mdl.a(i, j), -1.0}}, Sense::LessEqual, 0.0);
        add(fmt::format("C3[{},{},{}]", i, j, k), {{sjk, 1.0}, {skj, 1.0}, {mdl.a(i, k), -1.0}}, Sense::LessEqual, 0.0);
        add(fmt::format("SEQ[{},{},{}]", i, j, k),
            {{sjk, 1.0}, {skj, 1.0}, {mdl.a(i, j), -1.0}, {mdl.a(i, k), -1.0}}, Sense::GreaterEqual, -1.0);
      }
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k)
        if (j != k)
          add(fmt::format("C4[{},{},{}]", i, j, k),
              {{mdl.arrival(k), 1.0}, {mdl.finish(j), -1.0}, {mdl.a(i, j), -M}, {mdl.a(i, k), -M}, {mdl.s(i, j, k), -M}},
              Sense::GreaterEqual, tt.between(i, j, k) - 3.0 * M);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k)
      add(fmt::format("C5[{},{}]", i, k), {{mdl.arrival(k), 1.0}, {mdl.a(i, k), -M}}, Sense::GreaterEqual,
          tt.from_start(i, k) - M);
  for (int k = 0; k < nt; ++k)
    add(fmt::format("C6[{}]", k), {{mdl.start(k), 1.0}, {mdl.arrival(k), -1.0}}, Sense::GreaterEqual, 0.0);
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (j != k && inst.precedence(j, k) != 0)
        add(fmt::format("C7[{},{}]", j, k), {{mdl.start(k), 1.0}, {mdl.finish(j), -1.0}}, Sense::GreaterEqual,
            inst.wait(j, k));
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k)
      add(fmt::format("C9[{},{}]", i, k), {{mdl.finish(k), 1.0}, {mdl.start(k), -1.0}, {mdl.a(i, k), -M}},
          Sense::GreaterEqual, inst.durations(i, k) - M);
  for (int k = 0; k < nt; ++k)
    add(fmt::format("MS[{}]", k), {{mdl.makespan(), 1.0}, {mdl.finish(k), -1.0}}, Sense::GreaterEqual, 0.0);

  mdl.objective.assign(mdl.num_vars(), 0.0);
  if (objective == ObjectiveKind::Makespan) {
    mdl.objective[mdl.makespan()] = 1.0;
  } else {
    for (int k = 0; k < nt; ++k) mdl.objective[mdl.finish(k)] = 1.0;
  }
  return mdl;
}

double objective_value(ObjectiveKind kind, const TimedSchedule& ts) {
  if (kind == ObjectiveKind::Makespan) return ts.makespan;
  return std::accumulate(ts.finish.begin(), ts.finish.end(), 0.0);
}

std::vector<double> schedule_to_vector(const MilpModel& model, const TimedSchedule& ts) {
  const CandidateSchedule& c = ts.candidate;
  if (c.num_agents() != model.num_agents || c.num_tasks() != model.num_tasks ||
      static_cast<int>(ts.finish.size()) != model.num_tasks)
    throw DimensionMismatch("schedule_to_vector: schedule shape does not match the model");
  if (auto bad = c.problems(); !bad.empty()) throw Error("schedule_to_vector: invalid candidate: " + bad.front());
  std::vector<double> x(model.num_vars(), 0.0);
  for (int i = 0; i < model.num_agents; ++i) {
    const auto& seq = c.orders[i];
    for (size_t p = 0; p < seq.size(); ++p) {
      x[model.a(i, seq[p])] = 1.0;
      for (size_t q = p + 1; q < seq.size(); ++q) x[model.s(i, seq[p], seq[q])] = 1.0;
    }
  }
  for (int k = 0; k < model.num_tasks; ++k) {
    x[model.arrival(k)] = ts.arrival[k];
    x[model.start(k)] = ts.start[k];
    x[model.finish(k)] = ts.finish[k];
  }
  x[model.makespan()] = ts.makespan;
  return x;
}

TimedSchedule vector_to_schedule(const MilpModel& model, const Instance& inst, const std::vector<double>& x,
                                 double tol) {
  if (static_cast<int>(x.size()) != model.num_vars())
    throw DimensionMismatch("vector_to_schedule: vector length does not match the model");
  for (int v : model.binaries())
    if (std::min(std::abs(x[v]), std::abs(x[v] - 1.0)) > tol)
      throw NonIntegralSolution(fmt::format("{} = {} is not integral", model.vars[v].name, x[v]));
  const int na = model.num_agents;
  const int nt = model.num_tasks;
  std::vector<std::vector<int>> orders(na);
  for (int i = 0; i < na; ++i) {
    for (int k = 0; k < nt; ++k)
      if (x[model.a(i, k)] > 0.5) orders[i].push_back(k);
    std::stable_sort(orders[i].begin(), orders[i].end(),
                     [&](int p, int q) { return x[model.start(p)] < x[model.start(q)]; });
  }
  TimedSchedule ts;
  ts.candidate = CandidateSchedule::from_orders(nt, std::move(orders));
  ts.horizon = inst.horizon();
  ts.makespan = 0.0;
  for (int k = 0; k < nt; ++k) {
    ts.arrival.push_back(x[model.arrival(k)]);
    ts.start.push_back(x[model.start(k)]);
    ts.finish.push_back(x[model.finish(k)]);
    ts.feasible.push_back(std::isfinite(ts.finish[k]) && ts.finish[k] <= inst.tasks[k].window_end + tol);
    ts.makespan = std::max(ts.makespan, ts.finish[k]);
  }
  return ts;
}

}  // namespace mats
