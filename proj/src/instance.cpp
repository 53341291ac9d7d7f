#include "mats/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mats/error.hpp"

namespace mats {

using nlohmann::json;

double Instance::horizon() const {
  double h = 0.0;
  for (const Task& t : tasks) h = std::max(h, t.window_end);
  return h;
}

std::vector<int> predecessors(const Grid<int>& precedence, int task) {
  std::vector<int> out;
  for (int j = 0; j < precedence.rows(); ++j)
    if (precedence(j, task) != 0 && j != task) out.push_back(j);
  return out;
}

namespace {

// Returns the tasks of one directed cycle, or an empty list.
std::vector<int> find_cycle(const Grid<int>& prec) {
  const int n = prec.rows();
  std::vector<int> color(n, 0), parent(n, -1);
  std::vector<int> cycle;
  // Iterative DFS keeps deep chains off the call stack.
  for (int root = 0; root < n && cycle.empty(); ++root) {
    if (color[root] != 0) continue;
    std::vector<std::pair<int, int>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty() && cycle.empty()) {
      auto& [u, next] = stack.back();
      if (next == n) {
        color[u] = 2;
        stack.pop_back();
        continue;
      }
      const int v = next++;
      if (prec(u, v) == 0) continue;
      if (color[v] == 1) {
        for (int w = u; w != v; w = parent[w]) cycle.push_back(w);
        cycle.push_back(v);
        std::reverse(cycle.begin(), cycle.end());
      } else if (color[v] == 0) {
        color[v] = 1;
        parent[v] = u;
        stack.emplace_back(v, 0);
      }
    }
  }
  return cycle;
}

bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

bool has_cycle(const Grid<int>& precedence) { return !find_cycle(precedence).empty(); }

std::vector<Violation> validate(const Instance& inst) {
  std::vector<Violation> out;
  auto bad = [&](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  const Rect& ws = inst.workspace;

  if (!(ws.lo.x < ws.hi.x && ws.lo.y < ws.hi.y)) bad("workspace", "min corner must be below max corner");

  for (size_t o = 0; o < inst.obstacles.size(); ++o) {
    const Rect& r = inst.obstacles[o];
    if (!(r.lo.x < r.hi.x && r.lo.y < r.hi.y))
      bad(fmt::format("obstacles[{}]", o), "min corner must be strictly below max corner");
  }

  auto placed = [&](const Point& p, const std::string& field) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !ws.contains(p))
      bad(field, "position outside workspace");
    else if (point_in_any_obstacle(p, inst.obstacles))
      bad(field, "position inside an obstacle");
  };

  for (int i = 0; i < na; ++i) {
    const Agent& a = inst.agents[i];
    const std::string f = fmt::format("agents[{}]", i);
    if (a.id != i) bad(f + ".id", "id must equal its index");
    if (!finite_pos(a.velocity)) bad(f + ".velocity", "velocity must be positive and finite");
    placed(a.start, f + ".start");
  }
  for (int k = 0; k < nt; ++k) {
    const Task& t = inst.tasks[k];
    const std::string f = fmt::format("tasks[{}]", k);
    if (t.id != k) bad(f + ".id", "id must equal its index");
    if (!(std::isfinite(t.window_start) && std::isfinite(t.window_end) && t.window_start >= 0.0 &&
          t.window_start < t.window_end))
      bad(f + ".window", "requires 0 <= window_start < window_end");
    placed(t.position, f + ".position");
  }

  if (inst.durations.rows() != na || inst.durations.cols() != nt) {
    bad("durations", fmt::format("shape must be {}x{}", na, nt));
  } else {
    for (int i = 0; i < na; ++i)
      for (int k = 0; k < nt; ++k)
        if (!finite_pos(inst.durations(i, k)))
          bad(fmt::format("durations[{}][{}]", i, k), "duration must be positive and finite");
  }

  const bool prec_ok = inst.precedence.rows() == nt && inst.precedence.cols() == nt;
  if (!prec_ok) {
    bad("precedence", fmt::format("shape must be {}x{}", nt, nt));
  } else {
    for (int j = 0; j < nt; ++j) {
      if (inst.precedence(j, j) != 0) bad(fmt::format("precedence[{}][{}]", j, j), "diagonal must be zero");
      for (int k = 0; k < nt; ++k)
        if (inst.precedence(j, k) != 0 && inst.precedence(j, k) != 1)
          bad(fmt::format("precedence[{}][{}]", j, k), "entries must be 0 or 1");
    }
    Grid<int> off = inst.precedence;
    for (int j = 0; j < nt; ++j) off(j, j) = 0;
    if (auto cycle = find_cycle(off); !cycle.empty()) {
      std::string names;
      for (size_t c = 0; c < cycle.size(); ++c) names += (c ? "," : "") + std::to_string(cycle[c]);
      bad("precedence", "cycle through tasks " + names);
    }
  }

  if (inst.wait.rows() != nt || inst.wait.cols() != nt) {
    bad("wait", fmt::format("shape must be {}x{}", nt, nt));
  } else {
    for (int j = 0; j < nt; ++j)
      for (int k = 0; k < nt; ++k) {
        const double w = inst.wait(j, k);
        if (!std::isfinite(w) || w < 0.0)
          bad(fmt::format("wait[{}][{}]", j, k), "wait must be finite and nonnegative");
        else if (prec_ok && inst.precedence(j, k) == 0 && w != 0.0)
          bad(fmt::format("wait[{}][{}]", j, k), "wait must be zero without an order constraint");
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// GenConfig

std::vector<std::string> GenConfig::problems() const {
  std::vector<std::string> out;
  auto range = [&](const Range& r, const char* name, bool nonneg, bool positive) {
    if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi))
      out.push_back(fmt::format("{}: range must be finite with lo <= hi", name));
    else if (positive && r.lo <= 0.0)
      out.push_back(fmt::format("{}: range must be positive", name));
    else if (nonneg && r.lo < 0.0)
      out.push_back(fmt::format("{}: range must be nonnegative", name));
  };
  if (n_agents < 1) out.push_back("n_agents must be >= 1");
  if (n_tasks < 1) out.push_back("n_tasks must be >= 1");
  if (n_obstacles < 0) out.push_back("n_obstacles must be >= 0");
  if (!(workspace_width > 0.0 && workspace_height > 0.0)) out.push_back("workspace must have positive size");
  range(obstacle_size, "obstacle_size", true, true);
  range(velocity, "velocity", true, true);
  range(duration, "duration", true, true);
  range(release, "release", true, false);
  range(window_length, "window_length", true, true);
  range(wait, "wait", true, false);
  if (!(window_tightness > 0.0 && window_tightness <= 1.0)) out.push_back("window_tightness must lie in (0, 1]");
  if (!(precedence_density >= 0.0 && precedence_density < 1.0))
    out.push_back("precedence_density must lie in [0, 1)");
  if (max_retries < 1) out.push_back("max_retries must be >= 1");
  if (obstacle_size.hi > std::min(workspace_width, workspace_height))
    out.push_back("obstacle_size exceeds the workspace");
  return out;
}

namespace {

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
Range range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void to_json(json& j, const GenConfig& c) {
  j = json{{"n_agents", c.n_agents},
           {"n_tasks", c.n_tasks},
           {"n_obstacles", c.n_obstacles},
           {"workspace_width", c.workspace_width},
           {"workspace_height", c.workspace_height},
           {"obstacle_size", range_json(c.obstacle_size)},
           {"velocity", range_json(c.velocity)},
           {"duration", range_json(c.duration)},
           {"release", range_json(c.release)},
           {"window_length", range_json(c.window_length)},
           {"window_tightness", c.window_tightness},
           {"precedence_density", c.precedence_density},
           {"wait", range_json(c.wait)},
           {"max_retries", c.max_retries}};
}

void from_json(const json& j, GenConfig& c) {
  // Missing keys keep their defaults so config files can be partial.
  auto num = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  auto rng = [&](const char* key, Range& field) {
    if (j.contains(key)) field = range_from(j.at(key));
  };
  num("n_agents", c.n_agents);
  num("n_tasks", c.n_tasks);
  num("n_obstacles", c.n_obstacles);
  num("workspace_width", c.workspace_width);
  num("workspace_height", c.workspace_height);
  rng("obstacle_size", c.obstacle_size);
  rng("velocity", c.velocity);
  rng("duration", c.duration);
  rng("release", c.release);
  rng("window_length", c.window_length);
  num("window_tightness", c.window_tightness);
  num("precedence_density", c.precedence_density);
  rng("wait", c.wait);
  num("max_retries", c.max_retries);
}

// ---------------------------------------------------------------------------
// Instance file format

namespace {

json point_json(const Point& p) { return json::array({p.x, p.y}); }

template <class T>
json grid_json(const Grid<T>& g) {
  json rows = json::array();
  for (int r = 0; r < g.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(fmt::format("{}: expected an object", where));
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(fmt::format("{}: missing field '{}'", where, key));
  return *it;
}

template <class T>
T number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) throw ParseError(fmt::format("{}.{}: expected a number", where, key));
  return v.get<T>();
}

Point point_from(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ParseError(fmt::format("{}: expected [x, y]", where));
  return {v[0].get<double>(), v[1].get<double>()};
}

template <class T>
Grid<T> grid_from(const json& v, int rows, int cols, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    throw ParseError(fmt::format("{}: expected {} rows", where, rows));
  Grid<T> g(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const json& row = v[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ParseError(fmt::format("{}[{}]: expected {} columns", where, r, cols));
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ParseError(fmt::format("{}[{}][{}]: expected a number", where, r, c));
      g(r, c) = row[c].get<T>();
    }
  }
  return g;
}

const json& array_field(const json& obj, const char* key) {
  const json& v = field(obj, key, "instance");
  if (!v.is_array()) throw ParseError(fmt::format("instance.{}: expected an array", key));
  return v;
}

}  // namespace

json to_json(const Instance& inst) {
  json doc;
  doc["schema_version"] = kInstanceSchemaVersion;
  doc["workspace"] = {{"min", point_json(inst.workspace.lo)}, {"max", point_json(inst.workspace.hi)}};
  json agents = json::array();
  for (const Agent& a : inst.agents)
    agents.push_back({{"id", a.id}, {"start", point_json(a.start)}, {"velocity", a.velocity}});
  doc["agents"] = std::move(agents);
  json tasks = json::array();
  for (const Task& t : inst.tasks)
    tasks.push_back({{"id", t.id},
                     {"position", point_json(t.position)},
                     {"window_start", t.window_start},
                     {"window_end", t.window_end}});
  doc["tasks"] = std::move(tasks);
  json obstacles = json::array();
  for (const Obstacle& o : inst.obstacles)
    obstacles.push_back({{"min", point_json(o.lo)}, {"max", point_json(o.hi)}});
  doc["obstacles"] = std::move(obstacles);
  doc["durations"] = grid_json(inst.durations);
  doc["precedence"] = grid_json(inst.precedence);
  doc["wait"] = grid_json(inst.wait);
  doc["seed"] = inst.seed;
  return doc;
}

Instance instance_from_json(const json& doc) {
  const int version = number<int>(doc, "schema_version", "instance");
  if (version != kInstanceSchemaVersion)
    throw SchemaVersionMismatch(
        fmt::format("instance schema_version {} is not supported (expected {})", version, kInstanceSchemaVersion));

  Instance inst;
  const json& ws = field(doc, "workspace", "instance");
  inst.workspace = {point_from(field(ws, "min", "instance.workspace"), "instance.workspace.min"),
                    point_from(field(ws, "max", "instance.workspace"), "instance.workspace.max")};

  const json& agents = array_field(doc, "agents");
  for (size_t i = 0; i < agents.size(); ++i) {
    const std::string where = fmt::format("instance.agents[{}]", i);
    inst.agents.push_back({number<int>(agents[i], "id", where),
                           point_from(field(agents[i], "start", where), where + ".start"),
                           number<double>(agents[i], "velocity", where)});
  }
  const json& tasks = array_field(doc, "tasks");
  for (size_t k = 0; k < tasks.size(); ++k) {
    const std::string where = fmt::format("instance.tasks[{}]", k);
    inst.tasks.push_back({number<int>(tasks[k], "id", where),
                          point_from(field(tasks[k], "position", where), where + ".position"),
                          number<double>(tasks[k], "window_start", where),
                          number<double>(tasks[k], "window_end", where)});
  }
  const json& obstacles = array_field(doc, "obstacles");
  for (size_t o = 0; o < obstacles.size(); ++o) {
    const std::string where = fmt::format("instance.obstacles[{}]", o);
    inst.obstacles.push_back({point_from(field(obstacles[o], "min", where), where + ".min"),
                              point_from(field(obstacles[o], "max", where), where + ".max")});
  }
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  inst.durations = grid_from<double>(field(doc, "durations", "instance"), na, nt, "instance.durations");
  inst.precedence = grid_from<int>(field(doc, "precedence", "instance"), nt, nt, "instance.precedence");
  inst.wait = grid_from<double>(field(doc, "wait", "instance"), nt, nt, "instance.wait");
  const json& seed = field(doc, "seed", "instance");
  if (!seed.is_number_unsigned()) throw ParseError("instance.seed: expected an unsigned integer");
  inst.seed = seed.get<std::uint64_t>();
  return inst;
}

void save(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  // nlohmann emits the shortest round-tripping decimal for every double.
  out << to_json(inst).dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

Instance load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t upto = std::min(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError(fmt::format("{}:{}: {}", path.string(), line, e.what()));
  }
  try {
    return instance_from_json(doc);
  } catch (const SchemaVersionMismatch&) {
    throw;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace mats
