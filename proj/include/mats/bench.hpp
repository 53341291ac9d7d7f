#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mats/bnb.hpp"
#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/policy.hpp"
#include "mats/schedule.hpp"

namespace mats {

enum class MethodId { Baseline, Edf, CaEdf, BcOnly, BcRl };

inline constexpr MethodId kAllMethods[] = {MethodId::Baseline, MethodId::Edf, MethodId::CaEdf, MethodId::BcOnly,
                                           MethodId::BcRl};

const char* to_string(MethodId m);
MethodId method_from_string(const std::string& s);

struct BruteForceResult {
  bool feasible = false;
  double makespan = kInfinity;
  std::optional<TimedSchedule> schedule;
  long candidates = 0;  // schedules simulated
};

inline constexpr int kBruteForceMaxTasks = 6;

// Exhaustive search over assignments and per-agent permutations; the
// minimum-makespan feasible candidate wins, ties to the first in
// lexicographic (assignment, orders) order. Throws LimitExceeded when
// N_T > max_tasks (capped at kBruteForceMaxTasks).
BruteForceResult brute_force_optimal(const Instance& inst, const TravelTimes& tt,
                                     int max_tasks = kBruteForceMaxTasks);

struct BenchRow {
  MethodId method = MethodId::Baseline;
  std::string instance;
  int repeat = 0;
  std::string status;  // optimal | feasible | infeasible | failed
  double objective = kInfinity;
  double quality_score = 0.0;
  double search_time = 0.0;
  double validation_time = 0.0;
  double total_time = 0.0;
  long nodes = 0;
  bool warm_start_accepted = false;
  std::string error;  // set for failed rows
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator, 0 when n < 2
};

Stat mean_std(const std::vector<double>& v);

struct MethodSummary {
  MethodId method = MethodId::Baseline;
  int n = 0;         // rows used in the statistics
  int excluded = 0;  // failed rows
  Stat total_time, search_time, validation_time, quality_score;
  double warm_accept_rate = 0.0;  // over rows that carried a warm start
};

struct BenchPolicies {
  std::optional<PolicyNet> bc_only;
  std::optional<PolicyNet> bc_rl;
};

struct BenchOptions {
  int repeats = 3;
  int jobs = 1;
  bool timing_strict = false;  // forces jobs = 1
  SolveOptions solver;
};

struct BenchReport {
  std::vector<MethodId> methods;
  std::vector<std::string> instance_ids;
  BenchOptions options;
  std::uint64_t seed = 0;
  std::vector<BenchRow> rows;
  std::vector<MethodSummary> summary;
};

std::vector<MethodSummary> summarize(const std::vector<MethodId>& methods, const std::vector<BenchRow>& rows);

// Rows are produced instance by instance, repeat by repeat, cycling through
// methods inside each repeat so clock drift touches every method alike.
// Throws Error when a bc method is requested without its policy.
BenchReport run_benchmark(const std::vector<Instance>& instances, const std::vector<std::string>& instance_ids,
                          const std::vector<MethodId>& methods, const BenchOptions& opts,
                          const BenchPolicies& policies = {});

inline constexpr const char* kRawHeader =
    "method,instance,repeat,status,objective,quality_score,search_time_s,validation_time_s,total_time_s,nodes";
inline constexpr const char* kSummaryHeader =
    "method,n,excluded,single_sample,mean_total_time_s,std_total_time_s,mean_search_time_s,std_search_time_s,"
    "mean_validation_time_s,std_validation_time_s,mean_quality_score,std_quality_score,warm_accept_rate";
inline constexpr const char* kWarmHeader = "method,instance,repeat,warm_start_accepted";

// Writes summary.csv, raw.csv and warm_starts.csv into `dir`.
void emit_report(const BenchReport& report, const std::filesystem::path& dir);

// Reads raw.csv (and warm_starts.csv beside it, when present).
std::vector<BenchRow> load_raw(const std::filesystem::path& raw_csv);

void write_summary(const std::vector<MethodSummary>& summary, const std::filesystem::path& path);

}  // namespace mats
