// Command-line front end: gen, solve, expert-gen, train-bc, train-rl, bench, report.
//
// Every subcommand takes --config FILE.json, an object keyed by flag name
// (without dashes); flags given on the command line win. Each run writes a
// config echo in that format, so `--config <echo>` reproduces it. For `gen`,
// keys that are not flags (or the object under "generator") are generator
// settings.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 infeasible,
// 4 internal solver failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mats/bench.hpp"
#include "mats/bnb.hpp"
#include "mats/error.hpp"
#include "mats/heuristics.hpp"
#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

struct UsageError : mats::Error {
  using mats::Error::Error;
};

std::string default_out_dir() {
  const char* env = std::getenv("MATS_OUT_DIR");
  return env && *env ? env : "mats_out";
}

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw mats::Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// Instance files in `dir` (*.json except config echoes), sorted by name.
std::vector<fs::path> instance_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" && !e.path().stem().string().ends_with("config"))
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

mats::SolveOptions solver_options(double time_limit, long node_limit, const std::string& node_rule) {
  mats::SolveOptions o;
  o.time_limit = time_limit;
  o.node_limit = node_limit;
  o.node_rule = mats::node_rule_from_string(node_rule);
  if (auto bad = o.problems(); !bad.empty()) throw UsageError(bad.front());
  return o;
}

// Options shared by the solver-facing subcommands.
struct SolverFlags {
  double time_limit = 3600.0;
  long node_limit = 10'000'000;
  std::string node_rule = "depth_first";

  void add(CLI::App* app) {
    app->add_option("--time-limit", time_limit, "Solver time limit per solve, seconds");
    app->add_option("--node-limit", node_limit, "Solver node limit per solve");
    app->add_option("--node-rule", node_rule, "Node selection: depth_first | best_bound")
        ->check(CLI::IsMember({"depth_first", "best_bound"}));
  }
  mats::SolveOptions options() const { return solver_options(time_limit, node_limit, node_rule); }
  void echo(json& j) const {
    j["time-limit"] = time_limit;
    j["node-limit"] = node_limit;
    j["node-rule"] = node_rule;
  }
};

// ---------------------------------------------------------------- gen

struct GenCmd {
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir = default_out_dir();
  std::optional<int> agents, tasks, obstacles;
  std::optional<double> tightness, density;
  json generator = json::object();

  void add(CLI::App* app) {
    app->add_option("--count", count, "Number of instances")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "First seed; files are named by seed");
    app->add_option("--out-dir", out_dir, "Output directory");
    app->add_option("--agents", agents, "Override n_agents");
    app->add_option("--tasks", tasks, "Override n_tasks");
    app->add_option("--obstacles", obstacles, "Override n_obstacles");
    app->add_option("--tightness", tightness, "Override window_tightness");
    app->add_option("--density", density, "Override precedence_density");
  }

  int run() {
    mats::GenConfig c;
    try {
      mats::from_json(generator, c);
    } catch (const json::exception& e) {
      throw UsageError(std::string("generator config: ") + e.what());
    }
    if (agents) c.n_agents = *agents;
    if (tasks) c.n_tasks = *tasks;
    if (obstacles) c.n_obstacles = *obstacles;
    if (tightness) c.window_tightness = *tightness;
    if (density) c.precedence_density = *density;
    if (auto bad = c.problems(); !bad.empty()) throw UsageError("invalid generator config: " + bad.front());
    fs::create_directories(out_dir);
    for (int n = 0; n < count; ++n) {
      const std::uint64_t s = seed + static_cast<std::uint64_t>(n);
      mats::Instance inst;
      try {
        inst = mats::generate(c, s);
      } catch (const mats::GenerationFailed& e) {
        throw UsageError(fmt::format("seed {}: {}", s, e.what()));
      }
      mats::save(inst, fs::path(out_dir) / fmt::format("instance-{}.json", s));
    }
    json echo = {{"count", count}, {"seed", seed}, {"out-dir", out_dir}};
    mats::to_json(echo["generator"], c);
    write_json(echo, fs::path(out_dir) / "gen_config.json");
    std::cout << fmt::format("wrote {} instance(s) to {}\n", count, out_dir);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- solve

struct SolveCmd {
  std::string instance;
  std::string warm = "none";
  std::string checkpoint;
  std::string schedule_out;
  bool trace = false;
  SolverFlags solver;

  void add(CLI::App* app) {
    app->add_option("--instance", instance, "Instance file")->required();
    app->add_option("--warm", warm, "Warm start: none | edf | ca-edf | policy")
        ->check(CLI::IsMember({"none", "edf", "ca-edf", "policy"}));
    app->add_option("--checkpoint", checkpoint, "Policy checkpoint (for --warm policy)");
    app->add_option("--schedule-out", schedule_out, "Write the schedule as CSV");
    app->add_flag("--trace", trace, "Per-node trace on stderr");
    solver.add(app);
  }

  int run() {
    if (warm == "policy" && checkpoint.empty()) throw UsageError("--warm policy needs --checkpoint");
    const mats::Instance inst = mats::load(instance);
    if (auto v = mats::validate(inst); !v.empty())
      throw UsageError(fmt::format("invalid instance: {} {}", v.front().field, v.front().rule));
    const mats::TravelTimes tt = mats::compute_travel_times(inst);
    std::optional<mats::CandidateSchedule> cand;
    if (warm == "edf") cand = mats::edf(inst, tt);
    if (warm == "ca-edf") cand = mats::constraint_aware_edf(inst, tt);
    if (warm == "policy") {
      const mats::PolicyNet net = mats::load_checkpoint(checkpoint);
      cand = mats::decode(mats::forward(net, mats::encode(inst, tt)).probs, inst, tt);
    }
    mats::SolveOptions opts = solver.options();
    if (trace) opts.trace = &std::cerr;
    const mats::SolveResult r = mats::solve_instance(inst, tt, opts, cand);
    std::cout << fmt::format("status={}\n", mats::to_string(r.status));
    std::cout << fmt::format("limit_hit={}\n", r.limit_hit);
    std::cout << fmt::format("objective={:.9g}\n", r.objective);
    std::cout << fmt::format("bound={:.9g}\n", r.bound);
    std::cout << fmt::format("nodes={}\n", r.nodes_explored);
    std::cout << fmt::format("lp_iterations={}\n", r.lp_iterations_total);
    std::cout << fmt::format("build_time_s={:.6g}\n", r.build_time);
    std::cout << fmt::format("search_time_s={:.6g}\n", r.search_time);
    std::cout << fmt::format("validation_time_s={:.6g}\n", r.validation_time);
    std::cout << fmt::format("total_time_s={:.6g}\n", r.total_time);
    std::cout << fmt::format("warm_start={}\n", warm);
    std::cout << fmt::format("warm_start_accepted={}\n", r.warm_start_accepted);
    if (!r.warm_start_rejection.empty()) {
      std::string why;
      for (const auto& v : r.warm_start_rejection) why += (why.empty() ? "" : "; ") + v.to_string();
      std::cout << "warm_start_rejection=" << why << '\n';
    }
    if (r.schedule) {
      std::cout << fmt::format("quality_score={:.6g}\n", mats::quality_score(*r.schedule));
      if (!schedule_out.empty()) mats::save_schedule(*r.schedule, schedule_out);
    }
    return r.status == mats::SolveStatus::Infeasible ? kExitInfeasible : kExitOk;
  }
};

// ---------------------------------------------------------------- expert-gen

struct ExpertGenCmd {
  std::string instances_dir;
  std::string out;
  SolverFlags solver;

  void add(CLI::App* app) {
    app->add_option("--instances-dir", instances_dir, "Directory of instance files")->required();
    app->add_option("--out", out, "Dataset file")->required();
    solver.add(app);
  }

  int run() {
    const mats::SolveOptions opts = solver.options();
    std::vector<mats::ExpertExample> data;
    const auto files = instance_files(instances_dir);
    if (files.empty()) std::cerr << "warning: no instance files in " << instances_dir << '\n';
    for (const fs::path& f : files) {
      const mats::Instance inst = mats::load(f);
      if (auto ex = mats::label_instance(inst, f.stem().string(), opts))
        data.push_back(std::move(*ex));
      else
        std::cerr << "skipped " << f.string() << ": not solved to optimality within limits\n";
    }
    mats::save_dataset(data, out);
    json echo = {{"instances-dir", instances_dir}, {"out", out}};
    solver.echo(echo);
    write_json(echo, out + ".config.json");
    std::cout << fmt::format("wrote {} example(s) to {}\n", data.size(), out);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- train-bc

struct TrainBcCmd {
  std::string dataset;
  std::string out;
  std::string curve;
  mats::PolicyHyper hp;
  mats::BcOptions bc;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "Expert dataset file")->required();
    app->add_option("--out", out, "Checkpoint file")->required();
    app->add_option("--curve", curve, "Loss curve CSV (default <out>.loss.csv)");
    app->add_option("--epochs", bc.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--batch-size", bc.batch_size, "Minibatch size (<= 0: full batch)");
    app->add_option("--hidden", hp.hidden, "Hidden width")->check(CLI::PositiveNumber);
    app->add_option("--layers", hp.layers, "Message-passing rounds")->check(CLI::NonNegativeNumber);
    app->add_option("--lr", hp.lr, "Adam step size")->check(CLI::NonNegativeNumber);
    app->add_option("--seed", hp.seed, "Init and shuffle seed");
  }

  int run() {
    const auto data = mats::load_dataset(dataset);
    if (data.empty()) throw UsageError("dataset is empty: " + dataset);
    const mats::BcResult r = mats::bc_train(data, mats::PolicyNet::init(hp), bc);
    mats::save_checkpoint(r.net, out);
    mats::save_curve(r.loss, "loss", curve.empty() ? out + ".loss.csv" : curve);
    json echo = {{"dataset", dataset}, {"out", out},          {"epochs", bc.epochs}, {"batch-size", bc.batch_size},
                 {"hidden", hp.hidden}, {"layers", hp.layers}, {"lr", hp.lr},         {"seed", hp.seed}};
    if (!curve.empty()) echo["curve"] = curve;
    write_json(echo, out + ".config.json");
    std::cout << fmt::format("final_loss={:.6g}\ntrain_accuracy={:.6g}\nloss_increase_flagged={}\n",
                             r.loss.empty() ? 0.0 : r.loss.back(), mats::training_accuracy(r.net, data),
                             r.loss_increase_flagged);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- train-rl

struct TrainRlCmd {
  std::string checkpoint;
  std::string instances_dir;
  std::string out;
  std::string curve;
  std::string clock = "wall";
  double lr = 1e-4;
  mats::RlWeights weights;
  mats::RlOptions rl;
  SolverFlags solver;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Starting checkpoint (usually from train-bc)")->required();
    app->add_option("--instances-dir", instances_dir, "Training instances")->required();
    app->add_option("--out", out, "Output checkpoint")->required();
    app->add_option("--curve", curve, "Reward trace CSV (default <out>.reward.csv)");
    app->add_option("--episodes", rl.episodes, "Episodes")->check(CLI::NonNegativeNumber);
    app->add_option("--alpha", weights.alpha, "Weight of the schedule score");
    app->add_option("--beta", weights.beta, "Weight of the normalized solve time");
    app->add_option("--lr", lr, "Adam step size");
    app->add_option("--seed", rl.seed, "Sampling seed");
    app->add_option("--baseline-window", rl.baseline_window, "Moving-average baseline window")
        ->check(CLI::PositiveNumber);
    app->add_option("--clock", clock, "Time measure: wall | nodes")->check(CLI::IsMember({"wall", "nodes"}));
    solver.add(app);
  }

  int run() {
    mats::PolicyNet net = mats::load_checkpoint(checkpoint);
    net.hp.lr = lr;
    rl.clock = clock == "wall" ? mats::RewardClock::WallClock : mats::RewardClock::NodeCount;
    std::vector<mats::Instance> insts;
    for (const fs::path& f : instance_files(instances_dir)) insts.push_back(mats::load(f));
    if (insts.empty()) throw UsageError("no instance files in " + instances_dir);
    const mats::RlResult r = mats::rl_finetune(net, insts, solver.options(), weights, rl);
    mats::save_checkpoint(r.net, out);
    mats::save_curve(r.rewards, "reward", curve.empty() ? out + ".reward.csv" : curve);
    json echo = {{"checkpoint", checkpoint}, {"instances-dir", instances_dir}, {"out", out},
                 {"episodes", rl.episodes},  {"alpha", weights.alpha},         {"beta", weights.beta},
                 {"lr", lr},                 {"seed", rl.seed},                {"baseline-window", rl.baseline_window},
                 {"clock", clock}};
    if (!curve.empty()) echo["curve"] = curve;
    solver.echo(echo);
    write_json(echo, out + ".config.json");
    double mean = 0.0;
    for (double v : r.rewards) mean += v;
    std::cout << fmt::format("episodes={}\nmean_reward={:.6g}\n", r.rewards.size(),
                             r.rewards.empty() ? 0.0 : mean / r.rewards.size());
    return kExitOk;
  }
};

// ---------------------------------------------------------------- bench

struct BenchCmd {
  std::string instances_dir;
  std::vector<std::string> methods{"baseline", "edf", "ca_edf", "bc_only", "bc_rl"};
  int repeats = 3;
  std::string bc_checkpoint;
  std::string rl_checkpoint;
  int jobs = 1;
  bool timing_strict = false;
  std::string out_dir = default_out_dir();
  SolverFlags solver;

  void add(CLI::App* app) {
    app->add_option("--instances-dir", instances_dir, "Directory of instance files")->required();
    app->add_option("--methods", methods, "Methods: baseline edf ca_edf bc_only bc_rl")
        ->check(CLI::IsMember({"baseline", "edf", "ca_edf", "bc_only", "bc_rl"}));
    app->add_option("--repeats", repeats, "Repeats per instance")->check(CLI::PositiveNumber);
    app->add_option("--bc-checkpoint", bc_checkpoint, "Checkpoint for bc_only");
    app->add_option("--rl-checkpoint", rl_checkpoint, "Checkpoint for bc_rl");
    app->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--timing-strict", timing_strict, "Run rows one at a time so timings do not share cores");
    app->add_option("--out-dir", out_dir, "Output directory");
    solver.add(app);
  }

  int run() {
    std::vector<mats::MethodId> ms;
    for (const auto& m : methods) ms.push_back(mats::method_from_string(m));
    mats::BenchPolicies pol;
    for (mats::MethodId m : ms) {
      if (m == mats::MethodId::BcOnly && !pol.bc_only) {
        if (bc_checkpoint.empty()) throw UsageError("bc_only needs --bc-checkpoint");
        pol.bc_only = mats::load_checkpoint(bc_checkpoint);
      }
      if (m == mats::MethodId::BcRl && !pol.bc_rl) {
        if (rl_checkpoint.empty()) throw UsageError("bc_rl needs --rl-checkpoint");
        pol.bc_rl = mats::load_checkpoint(rl_checkpoint);
      }
    }
    std::vector<mats::Instance> insts;
    std::vector<std::string> ids;
    for (const fs::path& f : instance_files(instances_dir)) {
      insts.push_back(mats::load(f));
      ids.push_back(f.stem().string());
    }
    mats::BenchOptions o;
    o.repeats = repeats;
    o.jobs = jobs;
    o.timing_strict = timing_strict;
    o.solver = solver.options();
    const mats::BenchReport rep = mats::run_benchmark(insts, ids, ms, o, pol);
    mats::emit_report(rep, out_dir);
    json echo = {{"instances-dir", instances_dir},
                 {"methods", methods},
                 {"repeats", repeats},
                 {"jobs", jobs},
                 {"timing-strict", timing_strict},
                 {"out-dir", out_dir}};
    if (!bc_checkpoint.empty()) echo["bc-checkpoint"] = bc_checkpoint;
    if (!rl_checkpoint.empty()) echo["rl-checkpoint"] = rl_checkpoint;
    solver.echo(echo);
    write_json(echo, fs::path(out_dir) / "bench_config.json");
    for (const auto& s : rep.summary)
      std::cout << fmt::format("{:<9} n={} excluded={} total_time={:.6g}±{:.6g}s quality={:.6g} warm_accept={:.3g}\n",
                               mats::to_string(s.method), s.n, s.excluded, s.total_time.mean, s.total_time.std,
                               s.quality_score.mean, s.warm_accept_rate);
    return kExitOk;
  }
};

// ---------------------------------------------------------------- report

struct ReportCmd {
  std::string raw;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--raw", raw, "raw.csv from a bench run")->required();
    app->add_option("--out", out, "Summary CSV (default: summary.csv beside --raw)");
  }

  int run() {
    const auto rows = mats::load_raw(raw);
    std::vector<mats::MethodId> ms;
    for (const auto& r : rows)
      if (std::find(ms.begin(), ms.end(), r.method) == ms.end()) ms.push_back(r.method);
    const fs::path dest = out.empty() ? fs::path(raw).parent_path() / "summary.csv" : fs::path(out);
    mats::write_summary(mats::summarize(ms, rows), dest);
    write_json({{"raw", raw}, {"out", dest.string()}}, dest.string() + ".config.json");
    std::cout << fmt::format("summarized {} row(s) into {}\n", rows.size(), dest.string());
    return kExitOk;
  }
};

// Turns `--config FILE` into flags placed before the user's own arguments.
// Keys the user set explicitly are skipped; for `gen`, non-flag keys are
// collected as generator settings.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app, json& generator) {
  if (args.size() < 2) return args;
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args[1]);
  } catch (const CLI::OptionNotFound&) {
    return args;
  }
  std::optional<std::string> config;
  std::vector<std::string> user;
  for (size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      user.push_back(args[i]);
    }
  }
  if (!config) return args;
  const json doc = read_json(*config);
  if (!doc.is_object()) throw UsageError(*config + ": expected a JSON object");
  auto given = [&](const std::string& flag) {
    return std::any_of(user.begin(), user.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> out{args[0], args[1]};
  for (const auto& [key, value] : doc.items()) {
    const std::string flag = "--" + key;
    if (sub->get_option_no_throw(flag) == nullptr) {
      if (sub->get_name() != "gen") throw UsageError(fmt::format("{}: unknown key '{}'", *config, key));
      if (key == "generator")
        generator.update(value);
      else
        generator[key] = value;
      continue;
    }
    if (given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_array()) {
      out.push_back(flag);
      for (const auto& v : value) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    } else {
      out.push_back(flag);
      out.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  out.insert(out.end(), user.begin(), user.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent task allocation and scheduling toolkit", "mats"};
  app.require_subcommand(1);
  GenCmd gen;
  SolveCmd solve;
  ExpertGenCmd expert;
  TrainBcCmd bc;
  TrainRlCmd rl;
  BenchCmd bench;
  ReportCmd report;
  struct Entry {
    const char* name;
    const char* help;
    std::function<void(CLI::App*)> add;
    std::function<int()> run;
  };
  const std::vector<Entry> entries = {
      {"gen", "Generate random instances", [&](CLI::App* a) { gen.add(a); }, [&] { return gen.run(); }},
      {"solve", "Solve one instance", [&](CLI::App* a) { solve.add(a); }, [&] { return solve.run(); }},
      {"expert-gen", "Label instances with the exact solver", [&](CLI::App* a) { expert.add(a); },
       [&] { return expert.run(); }},
      {"train-bc", "Behavior-clone the policy", [&](CLI::App* a) { bc.add(a); }, [&] { return bc.run(); }},
      {"train-rl", "Fine-tune the policy against the solver", [&](CLI::App* a) { rl.add(a); },
       [&] { return rl.run(); }},
      {"bench", "Compare warm-start methods", [&](CLI::App* a) { bench.add(a); }, [&] { return bench.run(); }},
      {"report", "Summarize a raw.csv", [&](CLI::App* a) { report.add(a); }, [&] { return report.run(); }},
  };
  std::vector<CLI::App*> subs;
  for (const Entry& e : entries) {
    CLI::App* s = app.add_subcommand(e.name, e.help);
    s->add_option("--config", "JSON file of flag values (flags override)");
    e.add(s);
    subs.push_back(s);
  }

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(args, app, gen.generator);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    for (size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) return entries[i].run();
  } catch (const mats::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const mats::DivergenceDetected& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitSolver;
  } catch (const mats::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}
