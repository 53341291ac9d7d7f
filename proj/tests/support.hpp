#pragma once

// Fixture builders shared by the test binaries.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/random.hpp"
#include "mats/simplex.hpp"
#include "mats/schedule.hpp"

namespace mats::test {

// Obstacle-free instance on a 20 x 20 workspace: every agent at the origin
// with velocity 1, tasks on the x axis at (k + 1, 0), windows [0, 1000],
// durations 1, no order constraints.
inline Instance blank_instance(int na, int nt) {
  Instance inst;
  inst.workspace = {{0.0, 0.0}, {20.0, 20.0}};
  for (int i = 0; i < na; ++i) inst.agents.push_back({i, {0.0, 0.0}, 1.0});
  for (int k = 0; k < nt; ++k) inst.tasks.push_back({k, {k + 1.0, 0.0}, 0.0, 1000.0});
  inst.durations = Grid<double>(na, nt, 1.0);
  inst.precedence = Grid<int>(nt, nt, 0);
  inst.wait = Grid<double>(nt, nt, 0.0);
  return inst;
}

inline GenConfig small_config(int na, int nt, int obstacles) {
  GenConfig c;
  c.n_agents = na;
  c.n_tasks = nt;
  c.n_obstacles = obstacles;
  return c;
}

// Random complete candidate: each task to a random agent, each agent's list
// shuffled.
inline CandidateSchedule random_candidate(int na, int nt, Rng& rng) {
  std::vector<std::vector<int>> orders(na);
  for (int k = 0; k < nt; ++k) orders[uniform_index(rng, na)].push_back(k);
  for (auto& o : orders)
    for (size_t p = o.size(); p > 1; --p) std::swap(o[p - 1], o[uniform_index(rng, p)]);
  return CandidateSchedule::from_orders(nt, orders);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mats::test
