#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mats/instance.hpp"
#include "mats/milp_model.hpp"
#include "mats/motion.hpp"
#include "mats/schedule.hpp"
#include "mats/simplex.hpp"

namespace mats {

enum class BranchRule { MostFractional };

// DepthFirst dives floor-child first and is the default: with an incumbent
// in hand from the start it prunes earlier than best-bound on these big-M
// models. BestBound pops the lowest LP bound, ties by node id.
enum class NodeRule { DepthFirst, BestBound };

const char* to_string(NodeRule r);
NodeRule node_rule_from_string(const std::string& s);

struct SolveOptions {
  double time_limit = 3600.0;  // seconds
  double gap = 1e-6;           // relative
  long node_limit = 10'000'000;
  BranchRule branch_rule = BranchRule::MostFractional;
  NodeRule node_rule = NodeRule::DepthFirst;
  std::uint64_t seed = 0;  // reserved; all rules are deterministic
  double int_tol = 1e-6;
  // Children start the simplex from the parent's optimal basis.
  bool reuse_parent_basis = true;
  // One line per processed node when set:
  //   node <id> depth <d> bound <lp objective|inf> <action>
  // where action is one of: branch <var name>, prune-bound, infeasible,
  // integral <makespan>, incumbent <makespan>.
  std::ostream* trace = nullptr;

  std::vector<std::string> problems() const;
};

enum class SolveStatus { Optimal, Feasible, Infeasible };

const char* to_string(SolveStatus s);

struct WarmStartOutcome {
  bool accepted = false;
  std::vector<ConstraintViolation> rejection;  // empty when accepted
  std::vector<double> vector;                  // model vector when accepted
  double objective = kInfinity;
  std::optional<TimedSchedule> schedule;
  double validation_time = 0.0;  // seconds

  std::string reason() const;
};

// Simulates and validates `candidate`; on success the model vector and
// objective are returned as an incumbent.
WarmStartOutcome inject_warm_start(const MilpModel& model, const CandidateSchedule& candidate, const Instance& inst,
                                   const TravelTimes& tt);

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  bool limit_hit = false;
  std::optional<TimedSchedule> schedule;
  double objective = kInfinity;
  double bound = -kInfinity;  // proven lower bound
  long nodes_explored = 0;
  long lp_iterations_total = 0;
  double build_time = 0.0;       // model construction, not part of total_time
  double search_time = 0.0;
  double validation_time = 0.0;
  double total_time = 0.0;       // search_time + validation_time
  bool warm_start_given = false;
  bool warm_start_accepted = false;
  std::vector<ConstraintViolation> warm_start_rejection;
};

// Throws SolverError when the LP engine breaks down.
SolveResult solve(const MilpModel& model, const Instance& inst, const TravelTimes& tt, const SolveOptions& opts = {},
                  const std::optional<CandidateSchedule>& warm_start = std::nullopt);

SolveResult solve_instance(const Instance& inst, const TravelTimes& tt, const SolveOptions& opts = {},
                           const std::optional<CandidateSchedule>& warm_start = std::nullopt);

}  // namespace mats
