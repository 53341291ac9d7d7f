#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mats/bnb.hpp"
#include "mats/instance.hpp"
#include "mats/motion.hpp"
#include "mats/random.hpp"
#include "mats/schedule.hpp"

namespace mats {

inline constexpr int kAgentFeatures = 4;
inline constexpr int kTaskFeatures = 7;
inline constexpr int kPairFeatures = 2;

// Feature graph for one instance. Every time-like quantity is divided by
// the horizon (latest window end), so uniform time scaling is invisible.
//
// agent:  velocity / mean velocity, start x, start y (workspace-normalized),
//         mean_k t^T_{ik} / horizon
// task:   x, y, s_k / horizon, e_k / horizon, in-degree / (N_T - 1),
//         out-degree / (N_T - 1), mean_i t^E_{ik} / horizon
// pair:   t^T_{ik} / horizon, t^E_{ik} / horizon   (column i * N_T + k)
// order:  (j, k, W_{jk} / horizon) for every O_{jk} = 1
struct GraphInput {
  Eigen::MatrixXd agent;  // kAgentFeatures x N_A
  Eigen::MatrixXd task;   // kTaskFeatures x N_T
  Eigen::MatrixXd pair;   // kPairFeatures x (N_A * N_T)
  struct OrderEdge {
    int from = 0;
    int to = 0;
    double wait = 0.0;
  };
  std::vector<OrderEdge> order;

  int num_agents() const { return static_cast<int>(agent.cols()); }
  int num_tasks() const { return static_cast<int>(task.cols()); }
};

GraphInput encode(const Instance& inst, const TravelTimes& tt);

struct PolicyHyper {
  int layers = 2;
  int hidden = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
};

// Message-passing assignment policy.
//
//   h_a = tanh(Wa0 f_a + ba0),  h_t = tanh(Wt0 f_t + bt0)
//   per round l:
//     z_ik  = tanh(E [h_a_i; h_t_k; pair_ik] + bE)
//     q_jk  = tanh(Q [h_t_j; w_jk] + bQ)            over order edges
//     h_a_i <- tanh(A [h_a_i; mean_k z_ik] + bA)
//     h_t_k <- tanh(T [h_t_k; mean_i z_ik; mean_j q_jk] + bT)
//   u_ik = tanh(R [h_a_i; h_t_k; pair_ik] + bR),  logit_ik = w . u_ik
//   probability of agent i for task k = softmax over i of logit_ik
//
// Means over an empty set are zero. Only symmetric reductions touch the
// agent axis, so the output is equivariant to agent permutations.
struct PolicyNet {
  PolicyHyper hp;
  std::vector<Tensor> params;

  // Xavier-style uniform init from hp.seed; biases and the readout vector w
  // start at zero, so a fresh net is uniform over agents.
  static PolicyNet init(const PolicyHyper& hp);

  long num_parameters() const;
  bool all_finite() const;
  int index_of(const std::string& name) const;
  Eigen::MatrixXd& param(const std::string& name) { return params[index_of(name)].value; }
  const Eigen::MatrixXd& param(const std::string& name) const { return params[index_of(name)].value; }
};

using Gradients = std::vector<Eigen::MatrixXd>;

// Intermediate activations kept for the backward pass.
struct ForwardCache;

struct ForwardOutput {
  Eigen::MatrixXd probs;   // N_A x N_T, columns sum to 1
  Eigen::MatrixXd logits;  // N_A x N_T
  std::shared_ptr<const ForwardCache> cache;
};

// Throws DimensionMismatch when feature sizes disagree with the net. The
// returned cache points at `g`, which must outlive any backward() call.
ForwardOutput forward(const PolicyNet& net, const GraphInput& g);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
// `flip_tensor` >= 0 negates that tensor's contribution (mutation testing).
void backward(const PolicyNet& net, const ForwardOutput& out, const Eigen::MatrixXd& dlogits, Gradients& grads,
              int flip_tensor = -1);

Gradients zero_gradients(const PolicyNet& net);

// Mean per-task cross-entropy of `probs` against labels (agent per task).
double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

// Per-task argmax, ties to the lowest agent id.
std::vector<int> argmax_agents(const Eigen::MatrixXd& probs);

enum class DecodeMode { Greedy, Sample };

// Picks an agent per task (argmax with ties to the lowest id, or a draw
// from `rng` in Sample mode), then orders each agent's tasks:
//   1. visit tasks in a topological order of O, ready ties broken by
//      earlier deadline then lower id, appending each to its agent;
//   2. if that misses a window, list-schedule the same assignment picking
//      the ready task with the earliest finish, then with the least slack
//      (deadline minus finish), and keep the first that meets every window.
// In Greedy mode, if no ordering works, a depth-first search walks the
// visit order trying agents from most to least probable and backtracking
// as soon as a placed task misses its window; it stops at the first
// complete assignment or after `search_budget` placements. Returns the
// first schedule that meets every window, else the step-1 schedule.
inline constexpr long kDecodeSearchBudget = 20000;

CandidateSchedule decode(const Eigen::MatrixXd& probs, const Instance& inst, const TravelTimes& tt,
                         DecodeMode mode = DecodeMode::Greedy, Rng* rng = nullptr,
                         long search_budget = kDecodeSearchBudget);

// Same with explicit per-task agent choices.
CandidateSchedule decode_assignment(const std::vector<int>& agent_of_task, const Instance& inst,
                                    const TravelTimes& tt);

struct ExpertExample {
  std::string instance_id;
  Instance instance;
  GraphInput graph;
  std::vector<int> labels;  // agent per task
};

struct ExpertGenOptions {
  int count = 200;
  std::uint64_t seed = 1;
  SolveOptions solver;
};

// Solves `inst` exactly and labels each task with the chosen agent; nullopt
// when the solver does not prove optimality within its limits.
std::optional<ExpertExample> label_instance(const Instance& inst, const std::string& id, const SolveOptions& solver);

// Generates instances and labels each task with the exact solver's agent.
// Instances the solver cannot close within its limits are skipped.
std::vector<ExpertExample> make_expert_dataset(const GenConfig& config, const ExpertGenOptions& opts);

inline constexpr int kDatasetSchemaVersion = 1;
void save_dataset(const std::vector<ExpertExample>& data, const std::filesystem::path& path);
std::vector<ExpertExample> load_dataset(const std::filesystem::path& path);

struct BcOptions {
  int epochs = 100;
  int batch_size = 20;  // <= 0 means full batch
};

struct BcResult {
  PolicyNet net;
  std::vector<double> loss;      // mean training loss per epoch
  std::vector<double> accuracy;  // per-task top-1 training accuracy per epoch
  // Set when a 5-epoch block mean of the loss exceeds the previous block's.
  bool loss_increase_flagged = false;
};

// Adam on the mean per-task cross-entropy; minibatch order is shuffled from
// net.hp.seed. Throws DivergenceDetected on a non-finite loss.
BcResult bc_train(const std::vector<ExpertExample>& examples, PolicyNet net, const BcOptions& opts = {});

double training_accuracy(const PolicyNet& net, const std::vector<ExpertExample>& examples);

struct GradCheckOptions {
  int samples = 100;
  double step = 1e-5;
  std::uint64_t seed = 0;
  int flip_tensor = -1;
};

// Max relative error between backprop and central differences over sampled
// parameters (every tensor is sampled), denominator max(|a|, |n|, 1e-8).
double gradient_check(const PolicyNet& net, const GraphInput& g, const std::vector<int>& labels,
                      const GradCheckOptions& opts = {});

enum class RewardClock { WallClock, NodeCount };

struct RlWeights {
  double alpha = 1.0;
  double beta = 1.0;
};

struct RlOptions {
  int episodes = 200;
  int baseline_window = 32;
  RewardClock clock = RewardClock::WallClock;
  std::uint64_t seed = 0;
};

struct RlResult {
  PolicyNet net;
  std::vector<double> rewards;  // per episode
};

// REINFORCE: sample a candidate, warm-start the solver, reward
//   alpha * r_score(solver schedule) - beta * cost / cold_cost
// where cost is total_time (or nodes with NodeCount) and cold_cost is the
// same instance solved cold once. Episodes cycle through `instances`.
RlResult rl_finetune(PolicyNet net, const std::vector<Instance>& instances, const SolveOptions& solver,
                     const RlWeights& weights, const RlOptions& opts = {});

inline constexpr int kCheckpointSchemaVersion = 1;
void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path);
PolicyNet load_checkpoint(const std::filesystem::path& path);

// Plain CSV with header `epoch,<column>`.
void save_curve(const std::vector<double>& values, const std::string& column, const std::filesystem::path& path);

}  // namespace mats
