#include <doctest.h>

#include <cmath>

#include "mats/heuristics.hpp"
#include "support.hpp"

using namespace mats;

TEST_CASE("EDF processes tasks by deadline") {
  Instance inst = test::blank_instance(1, 3);
  inst.tasks[0].window_end = 8.0;
  inst.tasks[1].window_end = 3.0;
  inst.tasks[2].window_end = 5.0;
  const TravelTimes tt = euclidean_travel_times(inst);
  CHECK(edf(inst, tt).orders[0] == std::vector<int>{1, 2, 0});
}

TEST_CASE("EDF with one agent sorts everything by deadline") {
  Instance inst = test::blank_instance(1, 6);
  const double ends[] = {50, 20, 90, 20, 10, 70};
  for (int k = 0; k < 6; ++k) inst.tasks[k].window_end = ends[k];
  const TravelTimes tt = euclidean_travel_times(inst);
  CHECK(edf(inst, tt).orders[0] == std::vector<int>{4, 1, 3, 0, 5, 2});
}

TEST_CASE("EDF finish-time ties go to the lower agent id") {
  Instance inst = test::blank_instance(2, 2);
  inst.tasks[0].position = {1.0, 0.0};
  inst.tasks[1].position = {0.0, 1.0};
  const TravelTimes tt = euclidean_travel_times(inst);
  const CandidateSchedule c = edf(inst, tt);
  CHECK(c.orders[0] == std::vector<int>{0});
  CHECK(c.orders[1] == std::vector<int>{1});
}

TEST_CASE("CA-EDF follows a chain against its deadlines") {
  Instance inst = test::blank_instance(1, 3);
  inst.tasks[0].window_end = 300.0;
  inst.tasks[1].window_end = 200.0;
  inst.tasks[2].window_end = 100.0;
  inst.precedence(0, 1) = inst.precedence(1, 2) = 1;
  const TravelTimes tt = euclidean_travel_times(inst);
  CHECK(constraint_aware_edf(inst, tt).orders[0] == std::vector<int>{0, 1, 2});
  CHECK(edf(inst, tt).orders[0] == std::vector<int>{2, 1, 0});
  const TimedSchedule deadlocked = simulate(inst, tt, edf(inst, tt));
  CHECK(std::isinf(deadlocked.makespan));
}

TEST_CASE("CA-EDF puts the diamond sink last") {
  for (int na = 1; na <= 3; ++na) {
    Instance inst = test::blank_instance(na, 4);
    inst.precedence(0, 1) = inst.precedence(0, 2) = inst.precedence(1, 3) = inst.precedence(2, 3) = 1;
    inst.tasks[3].window_end = 5.0;  // most urgent, still must wait
    const TravelTimes tt = euclidean_travel_times(inst);
    const CandidateSchedule c = constraint_aware_edf(inst, tt);
    const TimedSchedule ts = simulate(inst, tt, c);
    for (int k = 0; k < 3; ++k) CHECK(ts.start[3] > ts.start[k]);
    CHECK(c.orders[c.agent_of(3)].back() == 3);
  }
}

TEST_CASE("without order constraints both heuristics coincide") {
  for (std::uint64_t s = 0; s < 40; ++s) {
    GenConfig c = test::small_config(3, 6, 2);
    c.precedence_density = 0.0;
    const Instance inst = generate(c, s);
    const TravelTimes tt = compute_travel_times(inst);
    CHECK(edf(inst, tt) == constraint_aware_edf(inst, tt));
  }
}

TEST_CASE("heuristics are total and CA-EDF never deadlocks") {
  for (std::uint64_t s = 0; s < 60; ++s) {
    GenConfig c = test::small_config(2 + static_cast<int>(s % 3), 2 + static_cast<int>(s % 6), 3);
    c.precedence_density = 0.5;
    const Instance inst = generate(c, s);
    const TravelTimes tt = compute_travel_times(inst);
    const CandidateSchedule e = edf(inst, tt);
    const CandidateSchedule ca = constraint_aware_edf(inst, tt);
    CHECK(e.problems().empty());
    CHECK(ca.problems().empty());
    CHECK(e == edf(inst, tt));
    CHECK(ca == constraint_aware_edf(inst, tt));
    const TimedSchedule ts = simulate(inst, tt, ca);
    CHECK(std::isfinite(ts.makespan));
    // Generated instances are calibrated so that CA-EDF meets every window.
    CHECK(ts.all_feasible());
  }
}
