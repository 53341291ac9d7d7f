#include "mats/motion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>

#include <fmt/format.h>
#include <json.hpp>

#include "mats/error.hpp"
#include "mats/random.hpp"

namespace mats {

size_t Roadmap::num_edges() const {
  size_t twice = 0;
  for (const auto& adj : adjacency) twice += adj.size();
  return twice / 2;
}

namespace {

void connect(Roadmap& rm, std::span<const Rect> obstacles) {
  const int n = static_cast<int>(rm.nodes.size());
  rm.adjacency.assign(n, {});
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const double len = distance(rm.nodes[u], rm.nodes[v]);
      if (len > rm.radius || segment_collides(rm.nodes[u], rm.nodes[v], obstacles)) continue;
      rm.adjacency[u].emplace_back(v, len);
      rm.adjacency[v].emplace_back(u, len);
    }
}

bool anchors_connected(const Roadmap& rm) {
  const int anchors = rm.num_anchors();
  if (anchors <= 1) return true;
  std::vector<char> seen(rm.nodes.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& [v, len] : rm.adjacency[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
  return std::all_of(seen.begin(), seen.begin() + anchors, [](char c) { return c != 0; });
}

}  // namespace

Roadmap build_roadmap(const Instance& inst, int n_samples, double radius, std::uint64_t seed,
                      int max_retries) {
  if (n_samples < 0) throw Error("build_roadmap: n_samples must be >= 0");
  if (!(radius > 0.0)) throw Error("build_roadmap: radius must be positive");

  Rng rng(seed);
  const Rect& ws = inst.workspace;
  Roadmap rm;
  rm.rng_seed = seed;
  rm.num_agents = inst.num_agents();
  rm.num_tasks = inst.num_tasks();
  rm.radius = radius;

  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    rm.nodes.clear();
    for (const Agent& a : inst.agents) rm.nodes.push_back(a.start);
    for (const Task& t : inst.tasks) rm.nodes.push_back(t.position);
    // Rejection sampling; the attempt cap only matters when obstacles cover
    // nearly the whole workspace.
    const long long cap = 1000LL * std::max(n_samples, 1);
    long long draws = 0;
    while (static_cast<int>(rm.nodes.size()) < rm.num_anchors() + n_samples && draws++ < cap) {
      const Point p{uniform(rng, ws.lo.x, ws.hi.x), uniform(rng, ws.lo.y, ws.hi.y)};
      if (!point_in_any_obstacle(p, inst.obstacles)) rm.nodes.push_back(p);
    }
    connect(rm, inst.obstacles);
    if (anchors_connected(rm)) return rm;
    rm.radius *= 2.0;
  }
  throw RoadmapDisconnected(fmt::format("roadmap anchors still disconnected after {} radius doublings (seed {})",
                                        max_retries, seed));
}

std::vector<double> shortest_paths(const Roadmap& rm, int source) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(rm.nodes.size(), inf);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, len] : rm.adjacency[u]) {
      const double nd = d + len;
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

TravelTimes::TravelTimes(std::vector<double> velocities, Grid<double> start_distance, Grid<double> task_distance)
    : velocities_(std::move(velocities)),
      start_distance_(std::move(start_distance)),
      task_distance_(std::move(task_distance)) {
  const int na = num_agents();
  const int nt = task_distance_.rows();
  if (task_distance_.cols() != nt || start_distance_.rows() != na || start_distance_.cols() != nt)
    throw DimensionMismatch("TravelTimes: distance matrices do not match agent/task counts");
  for (int j = 0; j < nt; ++j) {
    task_distance_(j, j) = 0.0;
    for (int k = j + 1; k < nt; ++k) task_distance_(k, j) = task_distance_(j, k);
  }
  from_start_ = Grid<double>(na, nt);
  between_.assign(static_cast<size_t>(na) * nt * nt, 0.0);
  for (int i = 0; i < na; ++i) {
    const double v = velocities_[i];
    for (int k = 0; k < nt; ++k) from_start_(i, k) = start_distance_(i, k) / v;
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k)
        between_[(static_cast<size_t>(i) * nt + j) * nt + k] = task_distance_(j, k) / v;
  }
}

TravelTimes TravelTimes::scaled(double factor) const {
  std::vector<double> v = velocities_;
  for (double& x : v) x /= factor;
  return TravelTimes(std::move(v), start_distance_, task_distance_);
}

TravelTimes travel_times(const Instance& inst, const Roadmap& rm) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  Grid<double> start(na, nt), tasks(nt, nt);
  auto check = [](double d, const char* what, int a, int b) {
    if (!std::isfinite(d))
      throw RoadmapDisconnected(fmt::format("no roadmap path from {} {} to task {}", what, a, b));
    return d;
  };
  for (int i = 0; i < na; ++i) {
    const auto dist = shortest_paths(rm, rm.agent_node(i));
    for (int k = 0; k < nt; ++k) start(i, k) = check(dist[rm.task_node(k)], "agent", i, k);
  }
  // One search per task; only the upper triangle is read so d(j,k) = d(k,j)
  // holds bit-for-bit.
  for (int j = 0; j < nt; ++j) {
    const auto dist = shortest_paths(rm, rm.task_node(j));
    for (int k = j + 1; k < nt; ++k) tasks(j, k) = check(dist[rm.task_node(k)], "task", j, k);
  }
  std::vector<double> velocities;
  for (const Agent& a : inst.agents) velocities.push_back(a.velocity);
  return TravelTimes(std::move(velocities), std::move(start), std::move(tasks));
}

TravelTimes compute_travel_times(const Instance& inst, const RoadmapOptions& opts) {
  const double radius = opts.radius > 0.0 ? opts.radius : inst.workspace.diagonal() / 4.0;
  return travel_times(inst, build_roadmap(inst, opts.n_samples, radius, inst.seed, opts.max_retries));
}

TravelTimes euclidean_travel_times(const Instance& inst) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  Grid<double> start(na, nt), tasks(nt, nt);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) start(i, k) = distance(inst.agents[i].start, inst.tasks[k].position);
  for (int j = 0; j < nt; ++j)
    for (int k = j + 1; k < nt; ++k) tasks(j, k) = distance(inst.tasks[j].position, inst.tasks[k].position);
  std::vector<double> velocities;
  for (const Agent& a : inst.agents) velocities.push_back(a.velocity);
  return TravelTimes(std::move(velocities), std::move(start), std::move(tasks));
}

void dump_roadmap(const Roadmap& rm, const std::filesystem::path& path) {
  using nlohmann::json;
  json nodes = json::array();
  for (const Point& p : rm.nodes) nodes.push_back(json::array({p.x, p.y}));
  json edges = json::array();
  for (size_t u = 0; u < rm.adjacency.size(); ++u)
    for (const auto& [v, len] : rm.adjacency[u])
      if (static_cast<int>(u) < v) edges.push_back(json::array({u, v, len}));
  const json doc{{"schema_version", 1},
                 {"rng_seed", rm.rng_seed},
                 {"radius", rm.radius},
                 {"num_agents", rm.num_agents},
                 {"num_tasks", rm.num_tasks},
                 {"nodes", std::move(nodes)},
                 {"edges", std::move(edges)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
}

}  // namespace mats
