#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mats/instance.hpp"

namespace mats {

struct RoadmapOptions {
  int n_samples = 200;
  double radius = 0.0;  // <= 0 selects workspace diagonal / 4
  int max_retries = 5;  // connection-radius doublings on disconnection
};

// Shared sampled roadmap. Node order: agent starts, then task positions,
// then free samples.
struct Roadmap {
  std::vector<Point> nodes;
  std::vector<std::vector<std::pair<int, double>>> adjacency;  // (neighbor, length m)
  std::uint64_t rng_seed = 0;
  double radius = 0.0;  // radius actually used after retries
  int num_agents = 0;
  int num_tasks = 0;

  int agent_node(int i) const { return i; }
  int task_node(int k) const { return num_agents + k; }
  int num_anchors() const { return num_agents + num_tasks; }
  size_t num_edges() const;
};

Roadmap build_roadmap(const Instance& inst, int n_samples, double radius, std::uint64_t seed,
                      int max_retries = 5);

// Dijkstra from `source` with a binary heap; ties pop lowest node index first.
std::vector<double> shortest_paths(const Roadmap& rm, int source);

// Collision-free travel data for one instance. Distances are shortest-path
// lengths over the roadmap, in meters; times divide by agent velocity.
class TravelTimes {
 public:
  TravelTimes() = default;
  // `task_distance` is symmetrized from its upper triangle.
  TravelTimes(std::vector<double> velocities, Grid<double> start_distance, Grid<double> task_distance);

  int num_agents() const { return static_cast<int>(velocities_.size()); }
  int num_tasks() const { return task_distance_.rows(); }

  // t^T_{ik}: agent i from its start to task k.
  double from_start(int i, int k) const { return from_start_(i, k); }
  // t^T_{ijk}: agent i from task j to task k.
  double between(int i, int j, int k) const {
    return between_[(static_cast<size_t>(i) * num_tasks() + j) * num_tasks() + k];
  }

  const Grid<double>& start_distance() const { return start_distance_; }
  const Grid<double>& task_distance() const { return task_distance_; }
  const Grid<double>& from_start_times() const { return from_start_; }
  std::span<const double> between_times() const { return between_; }
  std::span<const double> velocities() const { return velocities_; }

  // Same geometry with every time multiplied by `factor` (velocities divided).
  TravelTimes scaled(double factor) const;

  friend bool operator==(const TravelTimes&, const TravelTimes&) = default;

 private:
  std::vector<double> velocities_;
  Grid<double> start_distance_;
  Grid<double> task_distance_;
  Grid<double> from_start_;
  std::vector<double> between_;
};

TravelTimes travel_times(const Instance& inst, const Roadmap& rm);

// Roadmap with default options seeded by the instance seed, then travel
// times. Every pipeline stage uses this so travel data is reproducible from
// the instance file alone.
TravelTimes compute_travel_times(const Instance& inst, const RoadmapOptions& opts = {});

// Straight-line travel, valid only for obstacle-free instances.
TravelTimes euclidean_travel_times(const Instance& inst);

void dump_roadmap(const Roadmap& rm, const std::filesystem::path& path);

}  // namespace mats
