#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mats/instance.hpp"
#include "mats/motion.hpp"

namespace mats {

// Assignment plus a total order of tasks per agent. The pairwise sequencing
// variables S^i_{jk} are implied: S^i_{jk} = 1 iff j precedes k in orders[i].
struct CandidateSchedule {
  Grid<int> assignment;               // A, agents x tasks
  std::vector<std::vector<int>> orders;  // per agent, ordered task ids

  static CandidateSchedule from_orders(int num_tasks, std::vector<std::vector<int>> orders);

  int num_agents() const { return static_cast<int>(orders.size()); }
  int num_tasks() const { return assignment.cols(); }
  // Agent performing task k, or -1.
  int agent_of(int k) const;

  // Empty iff each task is in exactly one order list and the lists agree
  // with the assignment matrix.
  std::vector<std::string> problems() const;

  friend bool operator==(const CandidateSchedule&, const CandidateSchedule&) = default;
};

struct TimedSchedule {
  CandidateSchedule candidate;
  std::vector<double> arrival;  // t^A_k
  std::vector<double> start;    // t^S_k
  std::vector<double> finish;   // t^F_k
  std::vector<bool> feasible;   // window met and not deadlocked
  double makespan = 0.0;        // max_k t^F_k (+inf when deadlocked)
  double horizon = 0.0;         // t_ddl = max_k e_k

  int num_feasible() const;
  bool all_feasible() const;

  friend bool operator==(const TimedSchedule&, const TimedSchedule&) = default;
};

// Earliest-time forward simulation. Tasks on or downstream of a cycle in
// (agent sequences + order constraints) get +inf times and are infeasible.
TimedSchedule simulate(const Instance& inst, const TravelTimes& tt, const CandidateSchedule& cand);

// Normalized schedule quality in [0, 1]; the makespan term uses
// min(makespan, horizon) so a missed or deadlocked schedule contributes 0.
double r_score(const TimedSchedule& ts);

// Unnormalized counterpart in [0, N_T + 1].
double quality_score(const TimedSchedule& ts);

enum class ConstraintId { C1 = 1, C2, C3, C4, C5, C6, C7, C8, C9, C10 };

struct ConstraintViolation {
  ConstraintId id;
  int agent = -1;
  int j = -1;
  int k = -1;

  std::string to_string() const;
  friend bool operator==(const ConstraintViolation&, const ConstraintViolation&) = default;
};

std::string to_string(ConstraintId id);

inline constexpr double kTimeTolerance = 1e-6;

// Re-checks every assignment/scheduling constraint on the concrete times.
std::vector<ConstraintViolation> check_constraints(const Instance& inst, const TravelTimes& tt,
                                                   const TimedSchedule& ts, double tol = kTimeTolerance);

bool violates(const std::vector<ConstraintViolation>& v, ConstraintId id);

// CSV, one record per task: task,agent,position,arrival,start,finish,feasible.
void save_schedule(const TimedSchedule& ts, const std::filesystem::path& path);

}  // namespace mats
