#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mats/bnb.hpp"
#include "mats/error.hpp"
#include "mats/heuristics.hpp"
#include "mats/milp_model.hpp"
#include "support.hpp"

using namespace mats;

namespace {

long closed_form_rows(int na, int nt, int order_edges) {
  const long pairs = static_cast<long>(nt) * (nt - 1) / 2;
  return nt                                        // C1
         + 3L * na * pairs                         // C2, C3, SEQ
         + static_cast<long>(na) * nt * (nt - 1)   // C4
         + 2L * na * nt                            // C5, C9
         + nt                                      // C6
         + order_edges                             // C7
         + nt;                                     // makespan rows
}

int count_edges(const Instance& inst) {
  int e = 0;
  for (int j = 0; j < inst.num_tasks(); ++j)
    for (int k = 0; k < inst.num_tasks(); ++k) e += inst.precedence(j, k);
  return e;
}

}  // namespace

TEST_CASE("big-M closed form on a single task") {
  Instance inst = test::blank_instance(1, 1);
  inst.tasks[0].position = {3.0, 0.0};
  inst.tasks[0].window_end = 10.0;
  inst.durations(0, 0) = 2.0;
  CHECK(big_m(inst, euclidean_travel_times(inst)) == 18.0);

  inst.tasks[0].position = {0.0, 0.0};
  CHECK(big_m(inst, euclidean_travel_times(inst)) == 12.0);
}

TEST_CASE("big-M is homogeneous in time") {
  const Instance inst = generate(test::small_config(3, 5, 2), 4);
  const TravelTimes tt = compute_travel_times(inst);
  Instance scaled = inst;
  for (Task& t : scaled.tasks) {
    t.window_start *= 10.0;
    t.window_end *= 10.0;
  }
  for (int i = 0; i < inst.num_agents(); ++i)
    for (int k = 0; k < inst.num_tasks(); ++k) scaled.durations(i, k) *= 10.0;
  for (int j = 0; j < inst.num_tasks(); ++j)
    for (int k = 0; k < inst.num_tasks(); ++k) scaled.wait(j, k) *= 10.0;
  CHECK(big_m(scaled, tt.scaled(10.0)) == doctest::Approx(10.0 * big_m(inst, tt)).epsilon(1e-12));
}

TEST_CASE("variable and row counts") {
  for (auto [na, nt] : {std::pair{1, 1}, {2, 2}, {2, 3}, {3, 6}, {4, 5}}) {
    const Instance inst = generate(test::small_config(na, nt, 1), static_cast<std::uint64_t>(na * 10 + nt));
    const MilpModel m = build(inst, compute_travel_times(inst));
    CHECK(m.num_vars() == na * nt + na * nt * (nt - 1) + 3 * nt + 1);
    CHECK(static_cast<long>(m.rows.size()) == closed_form_rows(na, nt, count_edges(inst)));
    CHECK(static_cast<long>(m.rows.size()) == expected_row_count(inst));
    for (const ModelRow& r : m.rows)
      for (const auto& [c, v] : r.row.coeffs) {
        CHECK(c >= 0);
        CHECK(c < m.num_vars());
      }
  }
  const Instance two = test::blank_instance(2, 2);
  const MilpModel m = build(two, euclidean_travel_times(two));
  int a = 0, s = 0, t = 0;
  for (const Variable& v : m.vars) {
    if (v.name[0] == 'A') ++a;
    else if (v.name[0] == 'S') ++s;
    else ++t;
  }
  CHECK(a == 4);
  CHECK(s == 4);
  CHECK(t == 7);
}

TEST_CASE("smallest model") {
  Instance inst = test::blank_instance(1, 1);
  inst.tasks[0].position = {4.0, 0.0};
  inst.durations(0, 0) = 3.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  const MilpModel m = build(inst, tt);
  std::vector<std::string> names;
  for (const Variable& v : m.vars) names.push_back(v.name);
  CHECK(names == std::vector<std::string>{"A[0,0]", "tA[0]", "tS[0]", "tF[0]", "t_ms"});
  const SolveResult r = solve(m, inst, tt);
  CHECK(r.status == SolveStatus::Optimal);
  CHECK(r.objective == 7.0);
}

TEST_CASE("window bounds are folded into variables") {
  Instance inst = test::blank_instance(1, 2);
  inst.tasks[1].window_start = 5.0;
  inst.tasks[1].window_end = 50.0;
  const MilpModel m = build(inst, euclidean_travel_times(inst));
  CHECK(m.vars[m.start(1)].lower == 5.0);
  CHECK(m.vars[m.finish(1)].upper == 50.0);
}

TEST_CASE("schedule_to_vector agrees with the validator") {
  Rng rng(3);
  int feasible = 0, late = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const Instance inst = generate(test::small_config(3, 5, 2), s);
    const TravelTimes tt = compute_travel_times(inst);
    const MilpModel m = build(inst, tt);
    for (int n = 0; n < 10; ++n) {
      const TimedSchedule ts = simulate(inst, tt, test::random_candidate(3, 5, rng));
      if (!std::isfinite(ts.makespan)) continue;  // deadlocked: no finite vector
      const auto x = schedule_to_vector(m, ts);
      const bool clean = check_constraints(inst, tt, ts).empty();
      CHECK(clean == m.violations(x).empty());
      CHECK(clean == ts.all_feasible());
      ++(clean ? feasible : late);
    }
    const TimedSchedule ca = simulate(inst, tt, constraint_aware_edf(inst, tt));
    CHECK(m.violations(schedule_to_vector(m, ca)).empty());
  }
  CHECK(feasible > 0);
  CHECK(late > 0);

  Instance inst = test::blank_instance(1, 2);
  inst.tasks[1].window_end = 3.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  const MilpModel m = build(inst, tt);
  const TimedSchedule missed = simulate(inst, tt, CandidateSchedule::from_orders(2, {{0, 1}}));
  CHECK(m.violations(schedule_to_vector(m, missed)) == std::vector<std::string>{"bound:tF[1]"});
}

TEST_CASE("schedule_to_vector rejects bad shapes and incomplete candidates") {
  const Instance inst = test::blank_instance(2, 3);
  const TravelTimes tt = euclidean_travel_times(inst);
  const MilpModel m = build(inst, tt);
  TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(3, {{0, 1}, {2}}));
  TimedSchedule partial = ts;
  partial.candidate.orders[1].clear();
  partial.candidate.assignment(1, 2) = 0;
  CHECK_THROWS_AS(schedule_to_vector(m, partial), Error);
  const Instance other = test::blank_instance(2, 2);
  CHECK_THROWS_AS(schedule_to_vector(build(other, euclidean_travel_times(other)), ts), DimensionMismatch);
}

TEST_CASE("vector_to_schedule") {
  const Instance inst = test::blank_instance(1, 2);
  const TravelTimes tt = euclidean_travel_times(inst);
  const MilpModel m = build(inst, tt);
  std::vector<double> x(m.num_vars(), 0.0);
  x[m.a(0, 0)] = x[m.a(0, 1)] = 1.0;
  x[m.s(0, 0, 1)] = 1.0;
  x[m.start(0)] = 1.0;
  x[m.start(1)] = 3.0;
  CHECK(vector_to_schedule(m, inst, x).candidate.orders[0] == std::vector<int>{0, 1});
  x[m.a(0, 0)] = 0.5;
  CHECK_THROWS_AS(vector_to_schedule(m, inst, x), NonIntegralSolution);

  Rng rng(5);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Instance g = generate(test::small_config(3, 5, 2), s);
    const TravelTimes gt = compute_travel_times(g);
    const MilpModel gm = build(g, gt);
    const TimedSchedule ts = simulate(g, gt, test::random_candidate(3, 5, rng));
    if (!ts.all_feasible()) continue;
    const auto v = schedule_to_vector(gm, ts);
    const TimedSchedule back = vector_to_schedule(gm, g, v);
    CHECK(back.candidate == ts.candidate);
    const auto v2 = schedule_to_vector(gm, back);
    for (int b : gm.binaries()) CHECK(v2[b] == v[b]);
  }
}

TEST_CASE("solved vectors map back to valid schedules") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Instance inst = generate(test::small_config(2, 4, 1), s);
    const TravelTimes tt = compute_travel_times(inst);
    const SolveResult r = solve_instance(inst, tt);
    REQUIRE(r.schedule);
    CHECK(check_constraints(inst, tt, *r.schedule).empty());
  }
}

TEST_CASE("a larger big-M leaves the integer optimum unchanged") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Instance inst = generate(test::small_config(2, 3, 1), 100 + s);
    const TravelTimes tt = compute_travel_times(inst);
    const double M = big_m(inst, tt);
    const SolveResult a = solve(build(inst, tt, ObjectiveKind::Makespan, M), inst, tt);
    const SolveResult b = solve(build(inst, tt, ObjectiveKind::Makespan, 10.0 * M), inst, tt);
    CHECK(a.status == SolveStatus::Optimal);
    CHECK(b.status == SolveStatus::Optimal);
    CHECK(a.objective == b.objective);
  }
}

TEST_CASE("LP export names every variable") {
  test::TempDir dir("mats-lp");
  const Instance inst = test::blank_instance(2, 2);
  const MilpModel m = build(inst, euclidean_travel_times(inst));
  m.write_lp(dir / "m.lp");
  std::ifstream in(dir / "m.lp");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("S_0_1_0") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}
