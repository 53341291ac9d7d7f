#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/schedule.hpp"
#include "mats/simplex.hpp"

namespace mats {

enum class VarKind { Binary, Continuous };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = kInfinity;
};

struct ModelRow {
  std::string tag;  // e.g. "C4[1,0,2]"
  LpRow row;
};

enum class ObjectiveKind { Makespan, TotalFinishTime };

// Task allocation and scheduling MILP in matrix form.
//
// Variables, in index order:
//   A[i][k]                  binary, agent i performs task k
//   S[i][j][k], j != k       binary, j precedes k on agent i
//   arrival[k], start[k], finish[k]   continuous, seconds
//   makespan                 continuous, seconds
//
// Rows:
//   C1      sum_i A[i][k] = 1
//   C2/C3   S[i][j][k] + S[i][k][j] <= A[i][j], <= A[i][k]  (one pair per
//           unordered {j,k}; the (k,j) instances are the same rows)
//   SEQ     S[i][j][k] + S[i][k][j] >= A[i][j] + A[i][k] - 1
//   C4      arrival[k] >= -M(3 - A[i][j] - A[i][k] - S[i][j][k]) + finish[j] + t^T_{ijk}
//   C5      arrival[k] >= -M(1 - A[i][k]) + t^T_{ik}
//   C6      start[k] >= arrival[k]
//   C7      start[k] >= finish[j] + W[j][k], only where O[j][k] = 1
//   C9      finish[k] >= start[k] + t^E_{ik} - M(1 - A[i][k])
//   MS      makespan >= finish[k]
// C8 (start >= s_k) and C10 (finish <= e_k) are variable bounds.
//
// SEQ forces an order between any two co-assigned tasks; without it C4 is
// vacuous and an agent could overlap tasks. C9 is guarded per agent so only
// the assigned agent's duration binds.
struct MilpModel {
  int num_agents = 0;
  int num_tasks = 0;
  double big_m = 0.0;
  ObjectiveKind objective_kind = ObjectiveKind::Makespan;
  std::vector<Variable> vars;
  std::vector<ModelRow> rows;
  std::vector<double> objective;

  int a(int i, int k) const { return i * num_tasks + k; }
  int s(int i, int j, int k) const {
    return num_agents * num_tasks + i * num_tasks * (num_tasks - 1) + j * (num_tasks - 1) + (k < j ? k : k - 1);
  }
  int arrival(int k) const { return num_agents * num_tasks * num_tasks + 3 * k; }
  int start(int k) const { return arrival(k) + 1; }
  int finish(int k) const { return arrival(k) + 2; }
  int makespan() const { return num_agents * num_tasks * num_tasks + 3 * num_tasks; }

  int num_vars() const { return static_cast<int>(vars.size()); }
  std::vector<int> binaries() const;

  LpProblem relaxation() const;

  // Tags of rows or bounds violated by `x` beyond `tol`.
  std::vector<std::string> violations(const std::vector<double>& x, double tol = kTimeTolerance) const;

  // LP-format text export.
  void write_lp(const std::filesystem::path& path) const;
};

double big_m(const Instance& inst, const TravelTimes& tt);

// Closed-form row count, used to cross-check build().
long expected_row_count(const Instance& inst);

MilpModel build(const Instance& inst, const TravelTimes& tt, ObjectiveKind objective = ObjectiveKind::Makespan);
// Same with an explicit big-M (must be at least big_m(inst, tt)).
MilpModel build(const Instance& inst, const TravelTimes& tt, ObjectiveKind objective, double m);

// Objective value the model would assign to a simulated schedule.
double objective_value(ObjectiveKind kind, const TimedSchedule& ts);

std::vector<double> schedule_to_vector(const MilpModel& model, const TimedSchedule& ts);

// Throws NonIntegralSolution when a binary is farther than `tol` from 0/1.
TimedSchedule vector_to_schedule(const MilpModel& model, const Instance& inst, const std::vector<double>& x,
                                 double tol = 1e-6);

}  // namespace mats
