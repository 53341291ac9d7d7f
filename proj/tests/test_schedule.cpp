#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mats/heuristics.hpp"
#include "mats/schedule.hpp"
#include "support.hpp"

using namespace mats;

namespace {

TimedSchedule synthetic(int nt, int feasible, double makespan, double horizon) {
  TimedSchedule ts;
  ts.feasible.assign(nt, false);
  for (int k = 0; k < feasible; ++k) ts.feasible[k] = true;
  ts.makespan = makespan;
  ts.horizon = horizon;
  return ts;
}

}  // namespace

TEST_CASE("single task recurrence") {
  Instance inst = test::blank_instance(1, 1);
  inst.tasks[0].position = {5.0, 0.0};
  inst.tasks[0].window_end = 100.0;
  inst.durations(0, 0) = 10.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  const TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(1, {{0}}));
  CHECK(ts.arrival[0] == 5.0);
  CHECK(ts.start[0] == 5.0);
  CHECK(ts.finish[0] == 15.0);
  CHECK(ts.feasible[0]);
  CHECK(ts.makespan == 15.0);
  CHECK(ts.horizon == 100.0);
}

TEST_CASE("order constraint with wait on one agent") {
  Instance inst = test::blank_instance(1, 2);
  inst.tasks[0].position = {2.0, 0.0};
  inst.tasks[1].position = {3.0, 0.0};
  inst.durations(0, 0) = 4.0;
  inst.durations(0, 1) = 2.0;
  inst.precedence(0, 1) = 1;
  inst.wait(0, 1) = 3.0;
  inst.tasks[1].window_start = 1.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  const TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(2, {{0, 1}}));
  // Task 0: arrive 2, finish 6. Task 1: arrive 6 + 1 = 7, but waits until 6 + 3.
  CHECK(ts.finish[0] == 6.0);
  CHECK(ts.arrival[1] == 7.0);
  CHECK(ts.start[1] == std::max({7.0, 1.0, 6.0 + 3.0}));
  CHECK(ts.finish[1] == 11.0);
  CHECK(check_constraints(inst, tt, ts).empty());
}

TEST_CASE("order constraint against the agent sequence deadlocks") {
  Instance inst = test::blank_instance(1, 2);
  inst.precedence(0, 1) = 1;
  const TravelTimes tt = euclidean_travel_times(inst);
  const TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(2, {{1, 0}}));
  CHECK_FALSE(ts.feasible[0]);
  CHECK_FALSE(ts.feasible[1]);
  CHECK(std::isinf(ts.finish[0]));
  CHECK(std::isinf(ts.start[1]));
  CHECK(std::isinf(ts.makespan));
  CHECK(r_score(ts) == 0.0);
}

TEST_CASE("deadlock taints only downstream tasks") {
  Instance inst = test::blank_instance(2, 3);
  inst.precedence(0, 1) = 1;
  const TravelTimes tt = euclidean_travel_times(inst);
  const TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(3, {{1, 0}, {2}}));
  CHECK(ts.feasible[2]);
  CHECK(std::isfinite(ts.finish[2]));
  CHECK_FALSE(ts.feasible[0]);
}

TEST_CASE("r_score and quality_score arithmetic") {
  CHECK(r_score(synthetic(20, 20, 50.0, 50.0)) == doctest::Approx(20.0 / 21.0));
  CHECK(r_score(synthetic(20, 20, 0.0, 50.0)) == 1.0);
  CHECK(r_score(synthetic(4, 3, 25.0, 50.0)) == 0.7);
  CHECK(quality_score(synthetic(20, 20, 0.0, 50.0)) == 21.0);
  CHECK(quality_score(synthetic(20, 0, 60.0, 50.0)) == 0.0);
  CHECK(quality_score(synthetic(20, 10, 20.0, 50.0)) == doctest::Approx(10.6).epsilon(1e-15));
  CHECK(quality_score(synthetic(5, 2, kInfinity, 50.0)) == 2.0);
}

TEST_CASE("score bounds hold on random schedules") {
  Rng rng(4);
  for (int n = 0; n < 200; ++n) {
    const int nt = 1 + static_cast<int>(uniform_index(rng, 20));
    const int feas = static_cast<int>(uniform_index(rng, nt + 1));
    const double h = uniform(rng, 1.0, 100.0);
    const double ms = uniform01(rng) < 0.1 ? kInfinity : uniform(rng, 0.0, 2.0 * h);
    const TimedSchedule ts = synthetic(nt, feas, ms, h);
    CHECK(r_score(ts) >= 0.0);
    CHECK(r_score(ts) <= 1.0);
    CHECK(quality_score(ts) >= 0.0);
    CHECK(quality_score(ts) <= nt + 1.0);
  }
}

TEST_CASE("check_constraints catches a missed window and an overlap") {
  Instance inst = test::blank_instance(1, 2);
  inst.tasks[1].window_end = 3.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(2, {{0, 1}}));
  // 0: arrive 1, finish 2. 1: arrive 3, finish 4 > 3.
  const auto v = check_constraints(inst, tt, ts);
  REQUIRE(v.size() == 1);
  CHECK(v[0].id == ConstraintId::C10);
  CHECK(v[0].k == 1);

  inst.tasks[1].window_end = 1000.0;
  ts = simulate(inst, tt, CandidateSchedule::from_orders(2, {{0, 1}}));
  REQUIRE(check_constraints(inst, tt, ts).empty());
  // Task 0 ends at 2; task 1 may not be reached before 3 but starts at 2.5.
  ts.arrival[1] = ts.start[1] = 2.5;
  ts.finish[1] = 3.5;
  const auto w = check_constraints(inst, tt, ts);
  REQUIRE(w.size() == 1);
  CHECK(w[0] == ConstraintViolation{ConstraintId::C4, 0, 0, 1});
}

TEST_CASE("simulate is deterministic and consistent with the validator") {
  Rng rng(17);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Instance inst = generate(test::small_config(3, 6, 2), s);
    const TravelTimes tt = compute_travel_times(inst);
    for (int n = 0; n < 10; ++n) {
      const CandidateSchedule c = test::random_candidate(3, 6, rng);
      const TimedSchedule a = simulate(inst, tt, c);
      CHECK(a == simulate(inst, tt, c));
      for (int k = 0; k < 6; ++k) {
        if (!std::isfinite(a.finish[k])) continue;
        CHECK(a.arrival[k] <= a.start[k]);
        CHECK(a.start[k] <= a.finish[k]);
      }
      if (a.all_feasible()) CHECK(check_constraints(inst, tt, a).empty());
    }
  }
}

TEST_CASE("relaxing deadlines never loses feasibility") {
  Rng rng(23);
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Instance inst = generate(test::small_config(3, 6, 2), s);
    const TravelTimes tt = compute_travel_times(inst);
    Instance relaxed = inst;
    for (Task& t : relaxed.tasks) t.window_end += 2.5;
    for (int n = 0; n < 10; ++n) {
      const CandidateSchedule c = test::random_candidate(3, 6, rng);
      const TimedSchedule a = simulate(inst, tt, c);
      const TimedSchedule b = simulate(relaxed, tt, c);
      for (int k = 0; k < 6; ++k)
        if (a.feasible[k]) CHECK(b.feasible[k]);
    }
  }
}

TEST_CASE("candidate invariants") {
  const CandidateSchedule c = CandidateSchedule::from_orders(3, {{2, 0}, {1}});
  CHECK(c.problems().empty());
  CHECK(c.agent_of(0) == 0);
  CHECK(c.agent_of(1) == 1);
  CandidateSchedule bad = c;
  bad.orders[1].push_back(0);
  CHECK_FALSE(bad.problems().empty());
  CandidateSchedule missing = c;
  missing.orders[1].clear();
  missing.assignment(1, 1) = 0;
  CHECK_FALSE(missing.problems().empty());
}

TEST_CASE("schedule csv has one row per task") {
  test::TempDir dir("mats-sched");
  const Instance inst = generate(test::small_config(2, 4, 1), 2);
  const TravelTimes tt = compute_travel_times(inst);
  save_schedule(simulate(inst, tt, constraint_aware_edf(inst, tt)), dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string line;
  int lines = 0;
  std::getline(in, line);
  CHECK(line == "task,agent,position,arrival,start,finish,feasible");
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 4);
}
