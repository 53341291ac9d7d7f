#include "mats/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "mats/error.hpp"
#include "mats/heuristics.hpp"

namespace mats {

const char* to_string(MethodId m) {
  switch (m) {
    case MethodId::Baseline: return "baseline";
    case MethodId::Edf: return "edf";
    case MethodId::CaEdf: return "ca_edf";
    case MethodId::BcOnly: return "bc_only";
    case MethodId::BcRl: return "bc_rl";
  }
  return "?";
}

MethodId method_from_string(const std::string& s) {
  for (MethodId m : kAllMethods)
    if (s == to_string(m)) return m;
  throw Error("unknown method: " + s);
}

BruteForceResult brute_force_optimal(const Instance& inst, const TravelTimes& tt, int max_tasks) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  if (nt > std::min(max_tasks, kBruteForceMaxTasks))
    throw LimitExceeded(fmt::format("brute force limited to {} tasks, instance has {}",
                                    std::min(max_tasks, kBruteForceMaxTasks), nt));
  BruteForceResult best;
  std::vector<int> agent_of(nt, 0);
  std::vector<std::vector<int>> orders(na);
  // Per-agent permutations, agent 0 outermost, each in lexicographic order.
  std::function<void(int)> permute = [&](int i) {
    if (i == na) {
      ++best.candidates;
      TimedSchedule ts = simulate(inst, tt, CandidateSchedule::from_orders(nt, orders));
      if (ts.all_feasible() && ts.makespan < best.makespan) {
        best.feasible = true;
        best.makespan = ts.makespan;
        best.schedule = std::move(ts);
      }
      return;
    }
    std::sort(orders[i].begin(), orders[i].end());
    do {
      permute(i + 1);
    } while (std::next_permutation(orders[i].begin(), orders[i].end()));
  };
  // Assignments as an odometer with task 0 most significant.
  while (true) {
    for (auto& o : orders) o.clear();
    for (int k = 0; k < nt; ++k) orders[agent_of[k]].push_back(k);
    permute(0);
    int k = nt - 1;
    while (k >= 0 && agent_of[k] == na - 1) agent_of[k--] = 0;
    if (k < 0) break;
    ++agent_of[k];
  }
  return best;
}

Stat mean_std(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

std::vector<MethodSummary> summarize(const std::vector<MethodId>& methods, const std::vector<BenchRow>& rows) {
  std::vector<MethodSummary> out;
  for (MethodId m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> total, search, validation, quality;
    int warm = 0, accepted = 0;
    for (const BenchRow& r : rows) {
      if (r.method != m) continue;
      if (r.status == "failed") {
        ++s.excluded;
        continue;
      }
      total.push_back(r.total_time);
      search.push_back(r.search_time);
      validation.push_back(r.validation_time);
      quality.push_back(r.quality_score);
      if (m != MethodId::Baseline) {
        ++warm;
        accepted += r.warm_start_accepted;
      }
    }
    s.n = static_cast<int>(total.size());
    s.total_time = mean_std(total);
    s.search_time = mean_std(search);
    s.validation_time = mean_std(validation);
    s.quality_score = mean_std(quality);
    s.warm_accept_rate = warm ? static_cast<double>(accepted) / warm : std::nan("");
    out.push_back(s);
  }
  return out;
}

namespace {

std::optional<CandidateSchedule> warm_start_for(MethodId m, const Instance& inst, const TravelTimes& tt,
                                                const BenchPolicies& pol) {
  switch (m) {
    case MethodId::Baseline: return std::nullopt;
    case MethodId::Edf: return edf(inst, tt);
    case MethodId::CaEdf: return constraint_aware_edf(inst, tt);
    case MethodId::BcOnly: return decode(forward(*pol.bc_only, encode(inst, tt)).probs, inst, tt);
    case MethodId::BcRl: return decode(forward(*pol.bc_rl, encode(inst, tt)).probs, inst, tt);
  }
  return std::nullopt;
}

std::string num(double v) { return fmt::format("{:.6g}", v); }
// Shortest text that parses back to the same double.
std::string exact(double v) { return fmt::format("{}", v); }

}  // namespace

BenchReport run_benchmark(const std::vector<Instance>& instances, const std::vector<std::string>& instance_ids,
                          const std::vector<MethodId>& methods, const BenchOptions& opts,
                          const BenchPolicies& policies) {
  if (instances.size() != instance_ids.size()) throw DimensionMismatch("one id per instance expected");
  for (MethodId m : methods) {
    if (m == MethodId::BcOnly && !policies.bc_only) throw Error("bc_only needs a policy checkpoint");
    if (m == MethodId::BcRl && !policies.bc_rl) throw Error("bc_rl needs a policy checkpoint");
  }
  for (const std::string& id : instance_ids)
    if (id.find(',') != std::string::npos) throw Error("instance id contains a comma: " + id);
  if (opts.repeats <= 0) throw Error("repeats must be positive");

  BenchReport rep;
  rep.methods = methods;
  rep.instance_ids = instance_ids;
  rep.options = opts;

  std::vector<TravelTimes> tts;
  for (const Instance& inst : instances) tts.push_back(compute_travel_times(inst));

  const size_t per_instance = methods.size() * static_cast<size_t>(opts.repeats);
  rep.rows.resize(instances.size() * per_instance);
  auto run_row = [&](size_t idx) {
    const size_t n = idx / per_instance;
    const int repeat = static_cast<int>((idx % per_instance) / methods.size());
    const MethodId m = methods[idx % methods.size()];
    BenchRow row;
    row.method = m;
    row.instance = instance_ids[n];
    row.repeat = repeat;
    try {
      const auto warm = warm_start_for(m, instances[n], tts[n], policies);
      const SolveResult r = solve_instance(instances[n], tts[n], opts.solver, warm);
      row.status = to_string(r.status);
      row.objective = r.objective;
      row.quality_score = r.schedule ? quality_score(*r.schedule) : 0.0;
      row.search_time = r.search_time;
      row.validation_time = r.validation_time;
      row.total_time = r.total_time;
      row.nodes = r.nodes_explored;
      row.warm_start_accepted = r.warm_start_accepted;
    } catch (const std::exception& e) {
      row.status = "failed";
      row.error = e.what();
    }
    rep.rows[idx] = std::move(row);
  };

  const int jobs = opts.timing_strict ? 1 : std::max(1, opts.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < rep.rows.size(); ++i) run_row(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (size_t i = next++; i < rep.rows.size(); i = next++) run_row(i);
      });
    for (auto& th : pool) th.join();
  }
  rep.summary = summarize(methods, rep.rows);
  return rep;
}

void write_summary(const std::vector<MethodSummary>& summary, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << kSummaryHeader << '\n';
  for (const MethodSummary& s : summary)
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(s.method), s.n, s.excluded,
                       s.n == 1 ? 1 : 0, num(s.total_time.mean), num(s.total_time.std), num(s.search_time.mean),
                       num(s.search_time.std), num(s.validation_time.mean), num(s.validation_time.std),
                       num(s.quality_score.mean), num(s.quality_score.std), num(s.warm_accept_rate));
  if (!out) throw Error("write failed: " + path.string());
}

void emit_report(const BenchReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_summary(report.summary, dir / "summary.csv");
  std::ofstream raw(dir / "raw.csv");
  std::ofstream warm(dir / "warm_starts.csv");
  if (!raw || !warm) throw Error("cannot write report files in " + dir.string());
  raw << kRawHeader << '\n';
  warm << kWarmHeader << '\n';
  for (const BenchRow& r : report.rows) {
    raw << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", to_string(r.method), r.instance, r.repeat, r.status,
                       exact(r.objective), exact(r.quality_score), exact(r.search_time), exact(r.validation_time),
                       exact(r.total_time), r.nodes);
    warm << fmt::format("{},{},{},{}\n", to_string(r.method), r.instance, r.repeat, r.warm_start_accepted ? 1 : 0);
  }
  if (!raw || !warm) throw Error("write failed in " + dir.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<BenchRow> load_raw(const std::filesystem::path& raw_csv) {
  std::ifstream in(raw_csv);
  if (!in) throw Error("cannot read " + raw_csv.string());
  std::string line;
  if (!std::getline(in, line) || line != kRawHeader) throw ParseError(raw_csv.string() + ": unexpected header");
  std::vector<BenchRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError(fmt::format("{}:{}: expected 10 fields", raw_csv.string(), lineno));
    BenchRow r;
    try {
      r.method = method_from_string(f[0]);
      r.instance = f[1];
      r.repeat = std::stoi(f[2]);
      r.status = f[3];
      r.objective = std::stod(f[4]);
      r.quality_score = std::stod(f[5]);
      r.search_time = std::stod(f[6]);
      r.validation_time = std::stod(f[7]);
      r.total_time = std::stod(f[8]);
      r.nodes = std::stol(f[9]);
    } catch (const std::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", raw_csv.string(), lineno, e.what()));
    }
    rows.push_back(std::move(r));
  }
  const auto warm_path = raw_csv.parent_path() / "warm_starts.csv";
  std::ifstream warm(warm_path);
  if (warm && std::getline(warm, line) && line == kWarmHeader) {
    std::map<std::tuple<std::string, std::string, int>, bool> accepted;
    while (std::getline(warm, line)) {
      const auto f = split_csv(line);
      if (f.size() == 4) accepted[{f[0], f[1], std::stoi(f[2])}] = f[3] == "1";
    }
    for (BenchRow& r : rows) {
      auto it = accepted.find({to_string(r.method), r.instance, r.repeat});
      if (it != accepted.end()) r.warm_start_accepted = it->second;
    }
  }
  return rows;
}

}  // namespace mats
