#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mats/geometry.hpp"

namespace mats {

struct Agent {
  int id = 0;
  Point start;
  double velocity = 1.0;  // m/s

  friend bool operator==(const Agent&, const Agent&) = default;
};

struct Task {
  int id = 0;
  Point position;
  double window_start = 0.0;  // s_k: earliest start, seconds
  double window_end = 0.0;    // e_k: latest finish, seconds

  friend bool operator==(const Task&, const Task&) = default;
};

using Obstacle = Rect;

// Row-major dense matrix with value semantics.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// Full problem datum. Immutable once built.
struct Instance {
  std::vector<Agent> agents;
  std::vector<Task> tasks;
  std::vector<Obstacle> obstacles;
  Rect workspace;
  Grid<double> durations;  // t^E, agents x tasks, seconds
  Grid<int> precedence;    // O, tasks x tasks; O(j,k)=1: j precedes k
  Grid<double> wait;       // W, tasks x tasks, seconds
  std::uint64_t seed = 0;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int num_tasks() const { return static_cast<int>(tasks.size()); }
  // Planning horizon: the latest window end over all tasks.
  double horizon() const;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct GenConfig {
  int n_agents = 3;
  int n_tasks = 6;
  int n_obstacles = 2;
  double workspace_width = 20.0;
  double workspace_height = 20.0;
  Range obstacle_size{2.0, 5.0};
  Range velocity{0.5, 1.5};
  Range duration{2.0, 8.0};
  Range release{0.0, 10.0};       // window_start draw
  Range window_length{40.0, 80.0};  // draft window_end - window_start
  double window_tightness = 0.7;  // (0, 1]; smaller is tighter
  double precedence_density = 0.2;
  Range wait{0.0, 3.0};
  int max_retries = 20;

  // Empty when the config is usable.
  std::vector<std::string> problems() const;
};

void to_json(nlohmann::json& j, const GenConfig& c);
void from_json(const nlohmann::json& j, GenConfig& c);

// Deterministic for fixed (config, seed). Throws GenerationFailed when no
// draft with a feasible Constraint-Aware EDF schedule is found within
// config.max_retries attempts.
Instance generate(const GenConfig& config, std::uint64_t seed);

struct Violation {
  std::string field;
  std::string rule;
};

std::vector<Violation> validate(const Instance& inst);

inline constexpr int kInstanceSchemaVersion = 1;

nlohmann::json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& doc);

void save(const Instance& inst, const std::filesystem::path& path);
Instance load(const std::filesystem::path& path);

// Helpers shared by generators, heuristics and the policy encoder.
bool has_cycle(const Grid<int>& precedence);
std::vector<int> predecessors(const Grid<int>& precedence, int task);

}  // namespace mats
