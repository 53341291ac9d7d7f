#include <algorithm>
#include <optional>

#include <fmt/format.h>

#include "mats/error.hpp"
#include "mats/heuristics.hpp"
#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/random.hpp"
#include "mats/schedule.hpp"
#include "mats/simplex.hpp"

namespace mats {

namespace {

std::optional<Point> free_point(Rng& rng, const Rect& ws, const std::vector<Rect>& obstacles) {
  for (int tries = 0; tries < 10000; ++tries) {
    const Point p{uniform(rng, ws.lo.x, ws.hi.x), uniform(rng, ws.lo.y, ws.hi.y)};
    if (!point_in_any_obstacle(p, obstacles)) return p;
  }
  return std::nullopt;
}

// One draft with generous windows; nullopt when the draft is unusable.
std::optional<Instance> draft(const GenConfig& c, Rng& rng, std::uint64_t seed) {
  Instance inst;
  inst.seed = seed;
  inst.workspace = {{0.0, 0.0}, {c.workspace_width, c.workspace_height}};
  const Rect& ws = inst.workspace;
  for (int o = 0; o < c.n_obstacles; ++o) {
    const double w = uniform(rng, c.obstacle_size.lo, c.obstacle_size.hi);
    const double h = uniform(rng, c.obstacle_size.lo, c.obstacle_size.hi);
    const Point lo{uniform(rng, 0.0, ws.hi.x - w), uniform(rng, 0.0, ws.hi.y - h)};
    inst.obstacles.push_back({lo, {lo.x + w, lo.y + h}});
  }
  for (int i = 0; i < c.n_agents; ++i) {
    auto p = free_point(rng, ws, inst.obstacles);
    if (!p) return std::nullopt;
    inst.agents.push_back({i, *p, uniform(rng, c.velocity.lo, c.velocity.hi)});
  }
  for (int k = 0; k < c.n_tasks; ++k) {
    auto p = free_point(rng, ws, inst.obstacles);
    if (!p) return std::nullopt;
    const double s = uniform(rng, c.release.lo, c.release.hi);
    inst.tasks.push_back({k, *p, s, s + uniform(rng, c.window_length.lo, c.window_length.hi)});
  }
  inst.durations = Grid<double>(c.n_agents, c.n_tasks);
  for (int i = 0; i < c.n_agents; ++i)
    for (int k = 0; k < c.n_tasks; ++k) inst.durations(i, k) = uniform(rng, c.duration.lo, c.duration.hi);
  // Edges only run from lower to higher index, so the graph is a DAG.
  inst.precedence = Grid<int>(c.n_tasks, c.n_tasks, 0);
  inst.wait = Grid<double>(c.n_tasks, c.n_tasks, 0.0);
  for (int j = 0; j < c.n_tasks; ++j)
    for (int k = j + 1; k < c.n_tasks; ++k)
      if (uniform01(rng) < c.precedence_density) {
        inst.precedence(j, k) = 1;
        inst.wait(j, k) = uniform(rng, c.wait.lo, c.wait.hi);
      }
  return inst;
}

}  // namespace

Instance generate(const GenConfig& config, std::uint64_t seed) {
  if (auto bad = config.problems(); !bad.empty()) throw Error("invalid GenConfig: " + bad.front());
  Rng rng(seed);
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    auto inst = draft(config, rng, seed);
    if (!inst) continue;
    TravelTimes tt;
    try {
      tt = compute_travel_times(*inst);
    } catch (const RoadmapDisconnected&) {
      continue;
    }
    const TimedSchedule probe = simulate(*inst, tt, constraint_aware_edf(*inst, tt));
    if (!probe.all_feasible()) continue;
    // Shrink window ends towards a common anchor with an increasing map, so
    // the deadline order (and hence the probe's own schedule) is unchanged
    // and every task still meets its shrunk window.
    const double tau = config.window_tightness;
    if (tau < 1.0) {
      double anchor = -kInfinity;
      for (int k = 0; k < inst->num_tasks(); ++k)
        anchor = std::max(anchor, (probe.finish[k] - tau * inst->tasks[k].window_end) / (1.0 - tau));
      Instance shrunk = *inst;
      for (int k = 0; k < shrunk.num_tasks(); ++k) {
        Task& t = shrunk.tasks[k];
        t.window_end = std::max(probe.finish[k], std::min(t.window_end, anchor + tau * (t.window_end - anchor)));
      }
      // Rounding can in principle reorder near-equal deadlines; keep the
      // draft windows if the shrunk instance no longer passes its own probe.
      if (simulate(shrunk, tt, constraint_aware_edf(shrunk, tt)).all_feasible()) return shrunk;
    }
    return *inst;
  }
  throw GenerationFailed(fmt::format("no feasible draft within {} attempts (seed {})", config.max_retries, seed));
}

}  // namespace mats
