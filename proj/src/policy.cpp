#include "mats/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>

#include <fmt/format.h>
#include <json.hpp>

#include "mats/error.hpp"
#include "mats/milp_model.hpp"

namespace mats {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// Tensor layout: encoders, then 8 tensors per round, then the readout.
constexpr int kWa0 = 0, kBa0 = 1, kWt0 = 2, kBt0 = 3;
int round_base(int l) { return 4 + 8 * l; }
enum RoundSlot { kE = 0, kBE, kQ, kBQ, kA, kBA, kT, kBT };
int readout_base(int layers) { return 4 + 8 * layers; }
enum ReadoutSlot { kR = 0, kBR, kW };
constexpr int kReadoutTensors = 3;

std::vector<Tensor> layout(const PolicyHyper& hp) {
  const int h = hp.hidden;
  std::vector<Tensor> t;
  auto add = [&](std::string name, int r, int c) { t.push_back({std::move(name), MatrixXd::Zero(r, c)}); };
  add("Wa0", h, kAgentFeatures);
  add("ba0", h, 1);
  add("Wt0", h, kTaskFeatures);
  add("bt0", h, 1);
  for (int l = 0; l < hp.layers; ++l) {
    add(fmt::format("E{}", l), h, 2 * h + kPairFeatures);
    add(fmt::format("bE{}", l), h, 1);
    add(fmt::format("Q{}", l), h, h + 1);
    add(fmt::format("bQ{}", l), h, 1);
    add(fmt::format("A{}", l), h, 2 * h);
    add(fmt::format("bA{}", l), h, 1);
    add(fmt::format("T{}", l), h, 3 * h);
    add(fmt::format("bT{}", l), h, 1);
  }
  add("R", h, 2 * h + kPairFeatures);
  add("bR", h, 1);
  add("w", h, 1);
  return t;
}

MatrixXd tanh_affine(const MatrixXd& W, const MatrixXd& b, const MatrixXd& X) {
  MatrixXd pre = W * X;
  pre.colwise() += b.col(0);
  return pre.array().tanh().matrix();
}

// d(pre-activation) from d(output) of a tanh layer.
MatrixXd tanh_back(const MatrixXd& dout, const MatrixXd& out) {
  return (dout.array() * (1.0 - out.array().square())).matrix();
}

// Columns [h_a_i; h_t_k; pair_ik] for every pair.
MatrixXd pair_inputs(const MatrixXd& ha, const MatrixXd& ht, const MatrixXd& pair) {
  const int h = static_cast<int>(ha.rows());
  const int na = static_cast<int>(ha.cols());
  const int nt = static_cast<int>(ht.cols());
  MatrixXd x(2 * h + kPairFeatures, na * nt);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) {
      const int p = i * nt + k;
      x.block(0, p, h, 1) = ha.col(i);
      x.block(h, p, h, 1) = ht.col(k);
      x.block(2 * h, p, kPairFeatures, 1) = pair.col(p);
    }
  return x;
}

// Scatters d(pair input) back into agent and task embeddings.
void pair_inputs_back(const MatrixXd& dx, int na, int nt, MatrixXd& dha, MatrixXd& dht) {
  const int h = static_cast<int>(dha.rows());
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) {
      const int p = i * nt + k;
      dha.col(i) += dx.block(0, p, h, 1);
      dht.col(k) += dx.block(h, p, h, 1);
    }
}

class Adam {
 public:
  explicit Adam(const PolicyNet& net) : m_(zero_gradients(net)), v_(zero_gradients(net)) {}

  void step(PolicyNet& net, const Gradients& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (size_t p = 0; p < g.size(); ++p) {
      m_[p] = kBeta1 * m_[p] + (1.0 - kBeta1) * g[p];
      v_[p] = kBeta2 * v_[p] + (1.0 - kBeta2) * g[p].cwiseAbs2();
      net.params[p].value.array() -=
          lr * (m_[p].array() / c1) / ((v_[p].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Gradients m_, v_;
  int t_ = 0;
};

MatrixXd cross_entropy_dlogits(const MatrixXd& probs, const std::vector<int>& labels, double scale) {
  MatrixXd d = probs;
  for (int k = 0; k < d.cols(); ++k) d(labels[k], k) -= 1.0;
  return d * (scale / static_cast<double>(d.cols()));
}

void check_finite(const PolicyNet& net, const std::string& where) {
  if (!net.all_finite()) throw DivergenceDetected(where + ": non-finite parameters");
}

}  // namespace

struct ForwardCache {
  struct Round {
    MatrixXd xz, z, xq, q, xa, ha, xt, ht;  // ha/ht are the round outputs
  };
  MatrixXd ha0, ht0;
  std::vector<Round> rounds;
  std::vector<int> indegree;
  MatrixXd xr, u;
  const GraphInput* graph = nullptr;
};

GraphInput encode(const Instance& inst, const TravelTimes& tt) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  const double hz = inst.horizon();
  const Rect& ws = inst.workspace;
  GraphInput g;
  g.agent = MatrixXd::Zero(kAgentFeatures, na);
  g.task = MatrixXd::Zero(kTaskFeatures, nt);
  g.pair = MatrixXd::Zero(kPairFeatures, na * nt);
  double mean_v = 0.0;
  for (const Agent& a : inst.agents) mean_v += a.velocity;
  mean_v /= na;
  for (int i = 0; i < na; ++i) {
    double mean_travel = 0.0;
    for (int k = 0; k < nt; ++k) mean_travel += tt.from_start(i, k);
    g.agent(0, i) = inst.agents[i].velocity / mean_v;
    g.agent(1, i) = (inst.agents[i].start.x - ws.lo.x) / ws.width();
    g.agent(2, i) = (inst.agents[i].start.y - ws.lo.y) / ws.height();
    g.agent(3, i) = mean_travel / nt / hz;
  }
  const double deg_scale = std::max(1, nt - 1);
  for (int k = 0; k < nt; ++k) {
    const Task& t = inst.tasks[k];
    int in = 0, out = 0;
    double mean_dur = 0.0;
    for (int j = 0; j < nt; ++j) {
      in += inst.precedence(j, k);
      out += inst.precedence(k, j);
    }
    for (int i = 0; i < na; ++i) mean_dur += inst.durations(i, k);
    g.task(0, k) = (t.position.x - ws.lo.x) / ws.width();
    g.task(1, k) = (t.position.y - ws.lo.y) / ws.height();
    g.task(2, k) = t.window_start / hz;
    g.task(3, k) = t.window_end / hz;
    g.task(4, k) = in / deg_scale;
    g.task(5, k) = out / deg_scale;
    g.task(6, k) = mean_dur / na / hz;
  }
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) {
      g.pair(0, i * nt + k) = tt.from_start(i, k) / hz;
      g.pair(1, i * nt + k) = inst.durations(i, k) / hz;
    }
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (inst.precedence(j, k)) g.order.push_back({j, k, inst.wait(j, k) / hz});
  return g;
}

PolicyNet PolicyNet::init(const PolicyHyper& hp) {
  if (hp.layers < 0 || hp.hidden <= 0) throw Error("policy needs layers >= 0 and hidden > 0");
  PolicyNet net;
  net.hp = hp;
  net.params = layout(hp);
  Rng rng(hp.seed);
  for (Tensor& t : net.params) {
    // Biases and the readout vector stay zero.
    if (t.value.cols() == 1) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
    for (int r = 0; r < t.value.rows(); ++r)
      for (int c = 0; c < t.value.cols(); ++c) t.value(r, c) = uniform(rng, -limit, limit);
  }
  return net;
}

long PolicyNet::num_parameters() const {
  long n = 0;
  for (const Tensor& t : params) n += t.value.size();
  return n;
}

bool PolicyNet::all_finite() const {
  return std::all_of(params.begin(), params.end(), [](const Tensor& t) { return t.value.allFinite(); });
}

int PolicyNet::index_of(const std::string& name) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  throw Error("no policy tensor named " + name);
}

Gradients zero_gradients(const PolicyNet& net) {
  Gradients g;
  for (const Tensor& t : net.params) g.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
  return g;
}

ForwardOutput forward(const PolicyNet& net, const GraphInput& g) {
  const int h = net.hp.hidden;
  const int na = g.num_agents();
  const int nt = g.num_tasks();
  if (g.agent.rows() != kAgentFeatures || g.task.rows() != kTaskFeatures || g.pair.rows() != kPairFeatures ||
      g.pair.cols() != na * nt)
    throw DimensionMismatch("graph features do not match the policy input sizes");
  if (static_cast<int>(net.params.size()) != readout_base(net.hp.layers) + kReadoutTensors)
    throw DimensionMismatch("policy tensors do not match its layer count");
  const auto& P = net.params;
  auto cache = std::make_shared<ForwardCache>();
  cache->graph = &g;
  cache->indegree.assign(nt, 0);
  for (const auto& e : g.order) ++cache->indegree[e.to];

  MatrixXd ha = tanh_affine(P[kWa0].value, P[kBa0].value, g.agent);
  MatrixXd ht = tanh_affine(P[kWt0].value, P[kBt0].value, g.task);
  cache->ha0 = ha;
  cache->ht0 = ht;
  const int ne = static_cast<int>(g.order.size());
  for (int l = 0; l < net.hp.layers; ++l) {
    const int b = round_base(l);
    ForwardCache::Round r;
    r.xz = pair_inputs(ha, ht, g.pair);
    r.z = tanh_affine(P[b + kE].value, P[b + kBE].value, r.xz);
    MatrixXd ma = MatrixXd::Zero(h, na), mt = MatrixXd::Zero(h, nt), mp = MatrixXd::Zero(h, nt);
    for (int i = 0; i < na; ++i)
      for (int k = 0; k < nt; ++k) {
        ma.col(i) += r.z.col(i * nt + k) / nt;
        mt.col(k) += r.z.col(i * nt + k) / na;
      }
    r.xq = MatrixXd(h + 1, ne);
    for (int e = 0; e < ne; ++e) {
      r.xq.block(0, e, h, 1) = ht.col(g.order[e].from);
      r.xq(h, e) = g.order[e].wait;
    }
    r.q = tanh_affine(P[b + kQ].value, P[b + kBQ].value, r.xq);
    for (int e = 0; e < ne; ++e) mp.col(g.order[e].to) += r.q.col(e) / cache->indegree[g.order[e].to];
    r.xa = MatrixXd(2 * h, na);
    r.xa << ha, ma;
    r.xt = MatrixXd(3 * h, nt);
    r.xt << ht, mt, mp;
    r.ha = tanh_affine(P[b + kA].value, P[b + kBA].value, r.xa);
    r.ht = tanh_affine(P[b + kT].value, P[b + kBT].value, r.xt);
    ha = r.ha;
    ht = r.ht;
    cache->rounds.push_back(std::move(r));
  }
  const int ro = readout_base(net.hp.layers);
  cache->xr = pair_inputs(ha, ht, g.pair);
  cache->u = tanh_affine(P[ro + kR].value, P[ro + kBR].value, cache->xr);
  const VectorXd scores = cache->u.transpose() * P[ro + kW].value.col(0);

  ForwardOutput out;
  out.logits = MatrixXd(na, nt);
  out.probs = MatrixXd(na, nt);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) out.logits(i, k) = scores(i * nt + k);
  for (int k = 0; k < nt; ++k) {
    const VectorXd ex = (out.logits.col(k).array() - out.logits.col(k).maxCoeff()).exp();
    out.probs.col(k) = ex / ex.sum();
  }
  out.cache = std::move(cache);
  return out;
}

void backward(const PolicyNet& net, const ForwardOutput& out, const MatrixXd& dlogits, Gradients& grads,
              int flip_tensor) {
  const ForwardCache& c = *out.cache;
  const GraphInput& g = *c.graph;
  const auto& P = net.params;
  const int h = net.hp.hidden;
  const int na = g.num_agents();
  const int nt = g.num_tasks();
  const int ne = static_cast<int>(g.order.size());
  auto acc = [&](int idx, const MatrixXd& d) {
    if (idx == flip_tensor)
      grads[idx] -= d;
    else
      grads[idx] += d;
  };

  const int ro = readout_base(net.hp.layers);
  VectorXd dscore(na * nt);
  for (int i = 0; i < na; ++i)
    for (int k = 0; k < nt; ++k) dscore(i * nt + k) = dlogits(i, k);
  acc(ro + kW, c.u * dscore);
  const MatrixXd du = P[ro + kW].value.col(0) * dscore.transpose();
  const MatrixXd dpre_u = tanh_back(du, c.u);
  acc(ro + kR, dpre_u * c.xr.transpose());
  acc(ro + kBR, dpre_u.rowwise().sum());
  MatrixXd dha = MatrixXd::Zero(h, na), dht = MatrixXd::Zero(h, nt);
  pair_inputs_back(P[ro + kR].value.transpose() * dpre_u, na, nt, dha, dht);

  for (int l = net.hp.layers - 1; l >= 0; --l) {
    const int b = round_base(l);
    const ForwardCache::Round& r = c.rounds[l];
    const MatrixXd dpa = tanh_back(dha, r.ha);
    const MatrixXd dpt = tanh_back(dht, r.ht);
    acc(b + kA, dpa * r.xa.transpose());
    acc(b + kBA, dpa.rowwise().sum());
    acc(b + kT, dpt * r.xt.transpose());
    acc(b + kBT, dpt.rowwise().sum());
    const MatrixXd dxa = P[b + kA].value.transpose() * dpa;
    const MatrixXd dxt = P[b + kT].value.transpose() * dpt;
    dha = dxa.topRows(h);
    dht = dxt.topRows(h);
    const MatrixXd dma = dxa.bottomRows(h);
    const MatrixXd dmt = dxt.middleRows(h, h);
    const MatrixXd dmp = dxt.bottomRows(h);

    MatrixXd dq(h, ne);
    for (int e = 0; e < ne; ++e) dq.col(e) = dmp.col(g.order[e].to) / c.indegree[g.order[e].to];
    const MatrixXd dpq = tanh_back(dq, r.q);
    acc(b + kQ, dpq * r.xq.transpose());
    acc(b + kBQ, dpq.rowwise().sum());
    const MatrixXd dxq = P[b + kQ].value.transpose() * dpq;
    for (int e = 0; e < ne; ++e) dht.col(g.order[e].from) += dxq.block(0, e, h, 1);

    MatrixXd dz(h, na * nt);
    for (int i = 0; i < na; ++i)
      for (int k = 0; k < nt; ++k) dz.col(i * nt + k) = dma.col(i) / nt + dmt.col(k) / na;
    const MatrixXd dpz = tanh_back(dz, r.z);
    acc(b + kE, dpz * r.xz.transpose());
    acc(b + kBE, dpz.rowwise().sum());
    pair_inputs_back(P[b + kE].value.transpose() * dpz, na, nt, dha, dht);
  }

  const MatrixXd dpa0 = tanh_back(dha, c.ha0);
  const MatrixXd dpt0 = tanh_back(dht, c.ht0);
  acc(kWa0, dpa0 * g.agent.transpose());
  acc(kBa0, dpa0.rowwise().sum());
  acc(kWt0, dpt0 * g.task.transpose());
  acc(kBt0, dpt0.rowwise().sum());
}

double cross_entropy(const MatrixXd& probs, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != probs.cols()) throw DimensionMismatch("one label per task expected");
  double loss = 0.0;
  for (int k = 0; k < probs.cols(); ++k) loss -= std::log(std::max(probs(labels[k], k), 1e-300));
  return loss / static_cast<double>(probs.cols());
}

std::vector<int> argmax_agents(const MatrixXd& probs) {
  std::vector<int> out(probs.cols());
  for (int k = 0; k < probs.cols(); ++k) {
    int best = 0;
    for (int i = 1; i < probs.rows(); ++i)
      if (probs(i, k) > probs(best, k)) best = i;
    out[k] = best;
  }
  return out;
}

namespace {

// Topological order of O, ready tasks by (deadline, id).
std::vector<int> visit_order(const Instance& inst) {
  const int nt = inst.num_tasks();
  std::vector<int> indeg(nt, 0);
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k) indeg[k] += inst.precedence(j, k);
  using Key = std::pair<double, int>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  for (int k = 0; k < nt; ++k)
    if (indeg[k] == 0) ready.push({inst.tasks[k].window_end, k});
  std::vector<int> order;
  while (!ready.empty()) {
    const int j = ready.top().second;
    ready.pop();
    order.push_back(j);
    for (int k = 0; k < nt; ++k)
      if (inst.precedence(j, k) && --indeg[k] == 0) ready.push({inst.tasks[k].window_end, k});
  }
  if (static_cast<int>(order.size()) != nt) throw Error("order constraints contain a cycle");
  return order;
}

enum class ListRule { EarliestFinish, LeastSlack };

// List scheduling of a fixed assignment: repeatedly append the ready task
// with the smallest key (ties: earlier deadline, then lower id).
CandidateSchedule list_schedule(const std::vector<int>& agent_of_task, const Instance& inst, const TravelTimes& tt,
                                ListRule rule) {
  const int nt = inst.num_tasks();
  std::vector<std::vector<int>> orders(inst.num_agents());
  std::vector<double> tail(inst.num_agents(), 0.0), finish(nt, 0.0);
  std::vector<bool> done(nt, false);
  for (int step = 0; step < nt; ++step) {
    int best = -1;
    double best_key = kInfinity, best_finish = 0.0;
    for (int k = 0; k < nt; ++k) {
      if (done[k]) continue;
      const std::vector<int> preds = predecessors(inst.precedence, k);
      if (std::any_of(preds.begin(), preds.end(), [&](int j) { return !done[j]; })) continue;
      const int i = agent_of_task[k];
      const auto& seq = orders[i];
      const double arrival = seq.empty() ? tt.from_start(i, k) : tail[i] + tt.between(i, seq.back(), k);
      double start = std::max(arrival, inst.tasks[k].window_start);
      for (int j : preds) start = std::max(start, finish[j] + inst.wait(j, k));
      const double f = start + inst.durations(i, k);
      const double key = rule == ListRule::EarliestFinish ? f : inst.tasks[k].window_end - f;
      if (best < 0 || key < best_key ||
          (key == best_key && inst.tasks[k].window_end < inst.tasks[best].window_end)) {
        best = k;
        best_key = key;
        best_finish = f;
      }
    }
    const int i = agent_of_task[best];
    orders[i].push_back(best);
    tail[i] = finish[best] = best_finish;
    done[best] = true;
  }
  return CandidateSchedule::from_orders(nt, std::move(orders));
}

}  // namespace

CandidateSchedule decode_assignment(const std::vector<int>& agent_of_task, const Instance& inst,
                                    const TravelTimes& tt) {
  if (static_cast<int>(agent_of_task.size()) != inst.num_tasks())
    throw DimensionMismatch("one agent per task expected");
  std::vector<std::vector<int>> orders(inst.num_agents());
  for (int k : visit_order(inst)) {
    const int i = agent_of_task[k];
    if (i < 0 || i >= inst.num_agents()) throw DimensionMismatch(fmt::format("agent {} out of range", i));
    orders[i].push_back(k);
  }
  CandidateSchedule primary = CandidateSchedule::from_orders(inst.num_tasks(), std::move(orders));
  if (simulate(inst, tt, primary).all_feasible()) return primary;
  for (ListRule rule : {ListRule::EarliestFinish, ListRule::LeastSlack}) {
    CandidateSchedule alt = list_schedule(agent_of_task, inst, tt, rule);
    if (simulate(inst, tt, alt).all_feasible()) return alt;
  }
  return primary;
}

namespace {

// Depth-first search over assignments along the visit order, agents
// ranked by probability (ties to lower id). Appending never moves earlier
// tasks, so a window miss prunes the whole subtree.
std::optional<std::vector<int>> feasible_assignment(const MatrixXd& probs, const Instance& inst,
                                                    const TravelTimes& tt, long budget) {
  const int na = inst.num_agents();
  const int nt = inst.num_tasks();
  const std::vector<int> order = visit_order(inst);
  std::vector<std::vector<int>> ranked(nt, std::vector<int>(na));
  std::vector<std::vector<int>> preds(nt);
  for (int k = 0; k < nt; ++k) {
    std::iota(ranked[k].begin(), ranked[k].end(), 0);
    std::stable_sort(ranked[k].begin(), ranked[k].end(), [&](int a, int b) { return probs(a, k) > probs(b, k); });
    preds[k] = predecessors(inst.precedence, k);
  }
  std::vector<int> choice(nt, -1), last(na, -1);
  std::vector<double> tail(na, 0.0), finish(nt, 0.0);
  long placements = 0;
  std::function<bool(int)> place = [&](int depth) {
    if (depth == nt) return true;
    const int k = order[depth];
    for (int i : ranked[k]) {
      if (++placements > budget) return false;
      const double arrival = last[i] < 0 ? tt.from_start(i, k) : tail[i] + tt.between(i, last[i], k);
      double start = std::max(arrival, inst.tasks[k].window_start);
      for (int j : preds[k]) start = std::max(start, finish[j] + inst.wait(j, k));
      const double f = start + inst.durations(i, k);
      if (f > inst.tasks[k].window_end) continue;
      const int saved_last = last[i];
      const double saved_tail = tail[i];
      choice[k] = i;
      finish[k] = f;
      last[i] = k;
      tail[i] = f;
      if (place(depth + 1)) return true;
      last[i] = saved_last;
      tail[i] = saved_tail;
    }
    return false;
  };
  if (place(0)) return choice;
  return std::nullopt;
}

}  // namespace

CandidateSchedule decode(const MatrixXd& probs, const Instance& inst, const TravelTimes& tt, DecodeMode mode,
                         Rng* rng, long search_budget) {
  if (probs.rows() != inst.num_agents() || probs.cols() != inst.num_tasks())
    throw DimensionMismatch("probability matrix does not match the instance");
  std::vector<int> choice = argmax_agents(probs);
  if (mode == DecodeMode::Sample) {
    if (!rng) throw Error("sampled decoding needs an rng");
    for (int k = 0; k < probs.cols(); ++k) {
      const double u = uniform01(*rng);
      double cum = 0.0;
      choice[k] = static_cast<int>(probs.rows()) - 1;
      for (int i = 0; i < probs.rows(); ++i) {
        cum += probs(i, k);
        if (u < cum) {
          choice[k] = i;
          break;
        }
      }
    }
  }
  CandidateSchedule cand = decode_assignment(choice, inst, tt);
  if (mode == DecodeMode::Greedy && !simulate(inst, tt, cand).all_feasible()) {
    if (auto found = feasible_assignment(probs, inst, tt, search_budget)) {
      CandidateSchedule alt = decode_assignment(*found, inst, tt);
      if (simulate(inst, tt, alt).all_feasible()) return alt;
    }
  }
  return cand;
}

std::optional<ExpertExample> label_instance(const Instance& inst, const std::string& id, const SolveOptions& solver) {
  const TravelTimes tt = compute_travel_times(inst);
  const SolveResult res = solve_instance(inst, tt, solver);
  if (res.status != SolveStatus::Optimal) return std::nullopt;
  ExpertExample ex;
  ex.instance_id = id;
  ex.instance = inst;
  ex.graph = encode(inst, tt);
  for (int k = 0; k < inst.num_tasks(); ++k) ex.labels.push_back(res.schedule->candidate.agent_of(k));
  return ex;
}

std::vector<ExpertExample> make_expert_dataset(const GenConfig& config, const ExpertGenOptions& opts) {
  std::vector<ExpertExample> data;
  const long max_attempts = 5L * opts.count + 10;
  for (long n = 0; n < max_attempts && static_cast<int>(data.size()) < opts.count; ++n) {
    const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(n);
    Instance inst;
    try {
      inst = generate(config, seed);
    } catch (const GenerationFailed&) {
      continue;
    }
    if (auto ex = label_instance(inst, fmt::format("seed-{}", seed), opts.solver)) data.push_back(std::move(*ex));
  }
  return data;
}

void save_dataset(const std::vector<ExpertExample>& data, const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = kDatasetSchemaVersion;
  doc["examples"] = json::array();
  for (const ExpertExample& ex : data)
    doc["examples"].push_back({{"instance_id", ex.instance_id}, {"instance", to_json(ex.instance)}, {"labels", ex.labels}});
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<ExpertExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.contains("schema_version")) throw ParseError("dataset: missing field schema_version");
  if (doc["schema_version"] != kDatasetSchemaVersion)
    throw SchemaVersionMismatch(fmt::format("dataset schema {} unsupported", doc["schema_version"].dump()));
  std::vector<ExpertExample> data;
  for (const json& e : doc.at("examples")) {
    ExpertExample ex;
    ex.instance_id = e.at("instance_id").get<std::string>();
    ex.instance = instance_from_json(e.at("instance"));
    ex.labels = e.at("labels").get<std::vector<int>>();
    if (static_cast<int>(ex.labels.size()) != ex.instance.num_tasks())
      throw ParseError(ex.instance_id + ": one label per task expected");
    for (int a : ex.labels)
      if (a < 0 || a >= ex.instance.num_agents()) throw ParseError(ex.instance_id + ": label out of range");
    ex.graph = encode(ex.instance, compute_travel_times(ex.instance));
    data.push_back(std::move(ex));
  }
  return data;
}

double training_accuracy(const PolicyNet& net, const std::vector<ExpertExample>& examples) {
  long hit = 0, total = 0;
  for (const ExpertExample& ex : examples) {
    const std::vector<int> pred = argmax_agents(forward(net, ex.graph).probs);
    for (size_t k = 0; k < pred.size(); ++k) hit += pred[k] == ex.labels[k];
    total += static_cast<long>(pred.size());
  }
  return total ? static_cast<double>(hit) / total : 0.0;
}

BcResult bc_train(const std::vector<ExpertExample>& examples, PolicyNet net, const BcOptions& opts) {
  if (examples.empty()) throw Error("bc_train needs at least one example");
  for (const ExpertExample& ex : examples)
    if (static_cast<int>(ex.labels.size()) != ex.graph.num_tasks())
      throw DimensionMismatch(ex.instance_id + ": one label per task expected");
  BcResult res;
  Adam adam(net);
  Rng rng(net.hp.seed ^ 0x5bd1e995ULL);
  const int n = static_cast<int>(examples.size());
  const int batch = opts.batch_size > 0 ? std::min(opts.batch_size, n) : n;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    double loss_sum = 0.0;
    long hit = 0, tasks = 0;
    for (int lo = 0; lo < n; lo += batch) {
      const int hi = std::min(n, lo + batch);
      Gradients grads = zero_gradients(net);
      for (int b = lo; b < hi; ++b) {
        const ExpertExample& ex = examples[order[b]];
        const ForwardOutput out = forward(net, ex.graph);
        loss_sum += cross_entropy(out.probs, ex.labels);
        const std::vector<int> pred = argmax_agents(out.probs);
        for (size_t k = 0; k < pred.size(); ++k) hit += pred[k] == ex.labels[k];
        tasks += static_cast<long>(pred.size());
        backward(net, out, cross_entropy_dlogits(out.probs, ex.labels, 1.0 / (hi - lo)), grads);
      }
      adam.step(net, grads, net.hp.lr);
    }
    const double loss = loss_sum / n;
    if (!std::isfinite(loss)) throw DivergenceDetected(fmt::format("non-finite loss at epoch {}", epoch));
    check_finite(net, "bc_train");
    res.loss.push_back(loss);
    res.accuracy.push_back(static_cast<double>(hit) / tasks);
  }
  constexpr int kBlock = 5;
  for (size_t b = 2 * kBlock; b <= res.loss.size(); b += kBlock) {
    const double prev = std::accumulate(res.loss.begin() + b - 2 * kBlock, res.loss.begin() + b - kBlock, 0.0);
    const double cur = std::accumulate(res.loss.begin() + b - kBlock, res.loss.begin() + b, 0.0);
    if (cur > prev) res.loss_increase_flagged = true;
  }
  res.net = std::move(net);
  return res;
}

double gradient_check(const PolicyNet& net, const GraphInput& g, const std::vector<int>& labels,
                      const GradCheckOptions& opts) {
  const ForwardOutput out = forward(net, g);
  Gradients grads = zero_gradients(net);
  backward(net, out, cross_entropy_dlogits(out.probs, labels, 1.0), grads, opts.flip_tensor);

  Rng rng(opts.seed);
  std::vector<std::pair<int, long>> picks;
  for (size_t t = 0; t < net.params.size(); ++t) {
    const long size = net.params[t].value.size();
    for (long s = 0; s < std::min<long>(size, 4); ++s)
      picks.emplace_back(static_cast<int>(t), static_cast<long>(uniform_index(rng, size)));
  }
  const long total = net.num_parameters();
  while (static_cast<int>(picks.size()) < opts.samples) {
    long flat = static_cast<long>(uniform_index(rng, total));
    int t = 0;
    while (flat >= net.params[t].value.size()) flat -= net.params[t++].value.size();
    picks.emplace_back(t, flat);
  }

  double worst = 0.0;
  PolicyNet probe = net;
  for (auto [t, flat] : picks) {
    double& p = probe.params[t].value.data()[flat];
    const double saved = p;
    p = saved + opts.step;
    const double up = cross_entropy(forward(probe, g).probs, labels);
    p = saved - opts.step;
    const double down = cross_entropy(forward(probe, g).probs, labels);
    p = saved;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double analytic = grads[t].data()[flat];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

RlResult rl_finetune(PolicyNet net, const std::vector<Instance>& instances, const SolveOptions& solver,
                     const RlWeights& weights, const RlOptions& opts) {
  if (instances.empty()) throw Error("rl_finetune needs at least one instance");
  struct Episode {
    const Instance* inst;
    TravelTimes tt;
    MilpModel model;
    GraphInput graph;
    double cold_cost;
  };
  std::vector<Episode> env;
  for (const Instance& inst : instances) {
    Episode e{&inst, compute_travel_times(inst), {}, {}, 0.0};
    e.model = build(inst, e.tt);
    e.graph = encode(inst, e.tt);
    const SolveResult cold = solve(e.model, inst, e.tt, solver);
    e.cold_cost = opts.clock == RewardClock::WallClock ? cold.total_time : static_cast<double>(cold.nodes_explored);
    e.cold_cost = std::max(e.cold_cost, 1e-9);
    env.push_back(std::move(e));
  }

  RlResult res;
  Adam adam(net);
  Rng rng(opts.seed);
  for (int ep = 0; ep < opts.episodes; ++ep) {
    const Episode& e = env[ep % env.size()];
    const ForwardOutput out = forward(net, e.graph);
    const CandidateSchedule cand = decode(out.probs, *e.inst, e.tt, DecodeMode::Sample, &rng);
    const SolveResult sr = solve(e.model, *e.inst, e.tt, solver, cand);
    const double score = sr.schedule ? r_score(*sr.schedule) : 0.0;
    const double cost =
        opts.clock == RewardClock::WallClock ? sr.total_time : static_cast<double>(sr.nodes_explored);
    const double reward = weights.alpha * score - weights.beta * cost / e.cold_cost;
    if (!std::isfinite(reward)) throw DivergenceDetected(fmt::format("non-finite reward at episode {}", ep));

    const int window = std::min<int>(opts.baseline_window, static_cast<int>(res.rewards.size()));
    const double baseline =
        window == 0 ? reward
                    : std::accumulate(res.rewards.end() - window, res.rewards.end(), 0.0) / window;
    const double advantage = reward - baseline;
    std::vector<int> taken(e.inst->num_tasks());
    for (int k = 0; k < e.inst->num_tasks(); ++k) taken[k] = cand.agent_of(k);
    // Minimizing advantage * cross-entropy(taken) ascends advantage * log p.
    Gradients grads = zero_gradients(net);
    backward(net, out, cross_entropy_dlogits(out.probs, taken, advantage), grads);
    adam.step(net, grads, net.hp.lr);
    check_finite(net, "rl_finetune");
    res.rewards.push_back(reward);
  }
  res.net = std::move(net);
  return res;
}

void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path) {
  json doc;
  doc["schema_version"] = kCheckpointSchemaVersion;
  doc["hyper"] = {{"layers", net.hp.layers}, {"hidden", net.hp.hidden}, {"lr", net.hp.lr}, {"seed", net.hp.seed}};
  doc["tensors"] = json::array();
  for (const Tensor& t : net.params) {
    std::vector<double> data;
    for (int r = 0; r < t.value.rows(); ++r)
      for (int c = 0; c < t.value.cols(); ++c) data.push_back(t.value(r, c));
    doc["tensors"].push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"data", data}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

PolicyNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!doc.contains("schema_version")) throw ParseError("checkpoint: missing field schema_version");
  if (doc["schema_version"] != kCheckpointSchemaVersion)
    throw SchemaVersionMismatch(fmt::format("checkpoint schema {} unsupported", doc["schema_version"].dump()));
  PolicyHyper hp;
  const json& h = doc.at("hyper");
  hp.layers = h.at("layers").get<int>();
  hp.hidden = h.at("hidden").get<int>();
  hp.lr = h.at("lr").get<double>();
  hp.seed = h.at("seed").get<std::uint64_t>();
  PolicyNet net;
  net.hp = hp;
  net.params = layout(hp);
  const json& tensors = doc.at("tensors");
  if (tensors.size() != net.params.size()) throw DimensionMismatch("checkpoint tensor count mismatch");
  for (size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = net.params[i];
    const json& j = tensors[i];
    if (j.at("name") != t.name || j.at("rows") != t.value.rows() || j.at("cols") != t.value.cols())
      throw DimensionMismatch("checkpoint tensor " + j.at("name").get<std::string>() + " does not match " + t.name);
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<long>(data.size()) != t.value.size()) throw DimensionMismatch("tensor " + t.name + " size");
    for (int r = 0, p = 0; r < t.value.rows(); ++r)
      for (int c = 0; c < t.value.cols(); ++c) t.value(r, c) = data[p++];
  }
  return net;
}

void save_curve(const std::vector<double>& values, const std::string& column, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch," << column << '\n';
  for (size_t e = 0; e < values.size(); ++e) out << fmt::format("{},{:.9g}\n", e, values[e]);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace mats
