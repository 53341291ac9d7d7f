#include "mats/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "mats/error.hpp"

namespace mats {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Node {
  long id = 0;
  int depth = 0;
  double parent_bound = -kInfinity;
  std::vector<std::pair<int, std::uint8_t>> fixings;  // (binary var, value)
  std::shared_ptr<const LpBasis> basis;
};

struct BestBoundOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.parent_bound != b.parent_bound) return a.parent_bound > b.parent_bound;
    return a.id > b.id;
  }
};

// DFS stack or bound-ordered heap behind one interface.
class OpenNodes {
 public:
  explicit OpenNodes(NodeRule rule) : rule_(rule) {}
  bool empty() const { return rule_ == NodeRule::DepthFirst ? stack_.empty() : heap_.empty(); }
  void push(Node n) {
    if (rule_ == NodeRule::DepthFirst)
      stack_.push_back(std::move(n));
    else
      heap_.push(std::move(n));
  }
  Node pop() {
    Node n;
    if (rule_ == NodeRule::DepthFirst) {
      n = std::move(stack_.back());
      stack_.pop_back();
    } else {
      n = heap_.top();
      heap_.pop();
    }
    return n;
  }
  double min_bound() const {
    double b = kInfinity;
    if (rule_ == NodeRule::DepthFirst)
      for (const Node& n : stack_) b = std::min(b, n.parent_bound);
    else if (!heap_.empty())
      b = heap_.top().parent_bound;
    return b;
  }

 private:
  NodeRule rule_;
  std::vector<Node> stack_;
  std::priority_queue<Node, std::vector<Node>, BestBoundOrder> heap_;
};

std::string format_bound(double b) { return std::isfinite(b) ? fmt::format("{:.9g}", b) : "inf"; }

}  // namespace

const char* to_string(NodeRule r) { return r == NodeRule::DepthFirst ? "depth_first" : "best_bound"; }

NodeRule node_rule_from_string(const std::string& s) {
  if (s == "depth_first") return NodeRule::DepthFirst;
  if (s == "best_bound") return NodeRule::BestBound;
  throw Error("unknown node rule: " + s);
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

std::vector<std::string> SolveOptions::problems() const {
  std::vector<std::string> out;
  if (!(time_limit > 0)) out.push_back("time_limit must be positive");
  if (!(gap >= 0)) out.push_back("gap must be non-negative");
  if (node_limit <= 0) out.push_back("node_limit must be positive");
  if (!(int_tol > 0 && int_tol < 0.5)) out.push_back("int_tol must be in (0, 0.5)");
  return out;
}

std::string WarmStartOutcome::reason() const {
  if (accepted) return "accepted";
  std::string s = "rejected:";
  for (const auto& v : rejection) s += " " + v.to_string();
  return s;
}

WarmStartOutcome inject_warm_start(const MilpModel& model, const CandidateSchedule& candidate, const Instance& inst,
                                   const TravelTimes& tt) {
  const auto t0 = Clock::now();
  WarmStartOutcome out;
  if (auto bad = candidate.problems(); !bad.empty() || candidate.num_tasks() != model.num_tasks ||
                                       candidate.num_agents() != model.num_agents)
    throw DimensionMismatch("warm start candidate does not fit the model");
  TimedSchedule ts = simulate(inst, tt, candidate);
  out.rejection = check_constraints(inst, tt, ts);
  if (out.rejection.empty()) {
    out.accepted = true;
    out.vector = schedule_to_vector(model, ts);
    out.objective = objective_value(model.objective_kind, ts);
    out.schedule = std::move(ts);
  }
  out.validation_time = seconds_since(t0);
  return out;
}

SolveResult solve(const MilpModel& model, const Instance& inst, const TravelTimes& tt, const SolveOptions& opts,
                  const std::optional<CandidateSchedule>& warm_start) {
  if (auto bad = opts.problems(); !bad.empty()) throw Error("invalid SolveOptions: " + bad.front());
  SolveResult res;
  double incumbent = kInfinity;
  if (warm_start) {
    res.warm_start_given = true;
    WarmStartOutcome w = inject_warm_start(model, *warm_start, inst, tt);
    res.validation_time = w.validation_time;
    res.warm_start_accepted = w.accepted;
    res.warm_start_rejection = w.rejection;
    if (w.accepted) {
      incumbent = w.objective;
      res.schedule = std::move(w.schedule);
    }
  }

  const auto t0 = Clock::now();
  const LpProblem relax = model.relaxation();
  const LpSolver lp(relax);
  const std::vector<int> binaries = model.binaries();
  const auto prunable = [&](double bound) { return bound >= incumbent - opts.gap * std::abs(incumbent); };
  // Lowest bound among subtrees discarded by bound; feeds the proven bound.
  double pruned_bound = kInfinity;

  OpenNodes open(opts.node_rule);
  open.push(Node{});
  long next_id = 1;
  std::vector<double> lower(relax.lower), upper(relax.upper);

  while (!open.empty()) {
    if (res.nodes_explored >= opts.node_limit || seconds_since(t0) >= opts.time_limit) {
      res.limit_hit = true;
      break;
    }
    Node node = open.pop();
    ++res.nodes_explored;
    const auto trace = [&](const std::string& action, double bound) {
      if (opts.trace)
        *opts.trace << fmt::format("node {} depth {} bound {} {}\n", node.id, node.depth, format_bound(bound), action);
    };
    if (prunable(node.parent_bound)) {
      pruned_bound = std::min(pruned_bound, node.parent_bound);
      trace("prune-bound", node.parent_bound);
      continue;
    }

    lower = relax.lower;
    upper = relax.upper;
    for (auto [v, val] : node.fixings) lower[v] = upper[v] = val;
    const LpResult r = lp.solve(lower, upper, opts.reuse_parent_basis ? node.basis.get() : nullptr);
    res.lp_iterations_total += r.iterations;
    if (r.status == LpStatus::Infeasible) {
      trace("infeasible", kInfinity);
      continue;
    }
    if (r.status != LpStatus::Optimal)
      throw SolverError(fmt::format("LP relaxation at node {} ended with status {}", node.id, to_string(r.status)));
    const double bound = std::max(r.objective, node.parent_bound);
    if (prunable(bound)) {
      pruned_bound = std::min(pruned_bound, bound);
      trace("prune-bound", bound);
      continue;
    }

    int branch_var = -1;
    double best_frac = opts.int_tol;
    for (int v : binaries) {
      const double f = std::abs(r.x[v] - std::round(r.x[v]));
      if (f > best_frac) {
        best_frac = f;
        branch_var = v;
      }
    }

    if (branch_var < 0) {
      // Integral in every binary: the earliest-time simulation of the implied
      // candidate is feasible and no worse than the LP times.
      std::vector<double> x = r.x;
      for (int v : binaries) x[v] = std::round(x[v]);
      TimedSchedule ts = simulate(inst, tt, vector_to_schedule(model, inst, x, opts.int_tol).candidate);
      if (!ts.all_feasible()) {
        trace("integral-infeasible", bound);
        continue;
      }
      const double obj = objective_value(model.objective_kind, ts);
      if (obj < incumbent) {
        incumbent = obj;
        res.schedule = std::move(ts);
        trace(fmt::format("incumbent {}", format_bound(obj)), bound);
      } else {
        trace(fmt::format("integral {}", format_bound(obj)), bound);
      }
      continue;
    }

    trace("branch " + model.vars[branch_var].name, bound);
    auto basis = std::make_shared<const LpBasis>(r.basis);
    Node floor_child{next_id++, node.depth + 1, bound, node.fixings, basis};
    floor_child.fixings.emplace_back(branch_var, 0);
    Node ceil_child{next_id++, node.depth + 1, bound, std::move(node.fixings), basis};
    ceil_child.fixings.emplace_back(branch_var, 1);
    if (opts.node_rule == NodeRule::DepthFirst) {
      open.push(std::move(ceil_child));
      open.push(std::move(floor_child));
    } else {
      open.push(std::move(floor_child));
      open.push(std::move(ceil_child));
    }
  }

  res.search_time = seconds_since(t0);
  res.total_time = res.search_time + res.validation_time;
  res.objective = incumbent;
  res.bound = std::min({incumbent, pruned_bound, open.min_bound()});
  if (res.schedule)
    res.status = res.limit_hit ? SolveStatus::Feasible : SolveStatus::Optimal;
  else
    res.status = SolveStatus::Infeasible;
  return res;
}

SolveResult solve_instance(const Instance& inst, const TravelTimes& tt, const SolveOptions& opts,
                           const std::optional<CandidateSchedule>& warm_start) {
  const auto t0 = Clock::now();
  const MilpModel model = build(inst, tt);
  const double build_time = seconds_since(t0);
  SolveResult res = solve(model, inst, tt, opts, warm_start);
  res.build_time = build_time;
  return res;
}

}  // namespace mats
