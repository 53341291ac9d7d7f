#include "mats/heuristics.hpp"

#include <algorithm>
#include <limits>

namespace mats {

namespace {

// Agent tails are simulated incrementally; appended tasks never change the
// times of tasks already placed, so these estimates equal simulate().
class GreedyBuilder {
 public:
  GreedyBuilder(const Instance& inst, const TravelTimes& tt, bool honor_precedence)
      : inst_(inst), tt_(tt), honor_(honor_precedence),
        orders_(inst.num_agents()), tail_finish_(inst.num_agents(), 0.0),
        finish_(inst.num_tasks(), 0.0) {}

  double finish_if(int i, int k) const {
    const auto& seq = orders_[i];
    const double arrival =
        seq.empty() ? tt_.from_start(i, k) : tail_finish_[i] + tt_.between(i, seq.back(), k);
    double start = std::max(arrival, inst_.tasks[k].window_start);
    if (honor_)
      for (int j : predecessors(inst_.precedence, k)) start = std::max(start, finish_[j] + inst_.wait(j, k));
    return start + inst_.durations(i, k);
  }

  void place(int k) {
    int best = 0;
    double best_finish = std::numeric_limits<double>::infinity();
    for (int i = 0; i < inst_.num_agents(); ++i) {
      const double f = finish_if(i, k);
      if (f < best_finish) {
        best_finish = f;
        best = i;
      }
    }
    orders_[best].push_back(k);
    tail_finish_[best] = best_finish;
    finish_[k] = best_finish;
  }

  CandidateSchedule result() && {
    return CandidateSchedule::from_orders(inst_.num_tasks(), std::move(orders_));
  }

 private:
  const Instance& inst_;
  const TravelTimes& tt_;
  bool honor_;
  std::vector<std::vector<int>> orders_;
  std::vector<double> tail_finish_;
  std::vector<double> finish_;
};

bool earlier_deadline(const Instance& inst, int a, int b) {
  const double ea = inst.tasks[a].window_end, eb = inst.tasks[b].window_end;
  return ea < eb || (ea == eb && a < b);
}

}  // namespace

CandidateSchedule edf(const Instance& inst, const TravelTimes& tt) {
  std::vector<int> order(inst.num_tasks());
  for (int k = 0; k < inst.num_tasks(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return earlier_deadline(inst, a, b); });
  GreedyBuilder g(inst, tt, false);
  for (int k : order) g.place(k);
  return std::move(g).result();
}

CandidateSchedule constraint_aware_edf(const Instance& inst, const TravelTimes& tt) {
  const int nt = inst.num_tasks();
  std::vector<int> missing(nt, 0);
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < nt; ++k)
      if (j != k && inst.precedence(j, k) != 0) ++missing[k];
  std::vector<bool> done(nt, false);
  GreedyBuilder g(inst, tt, true);
  for (int step = 0; step < nt; ++step) {
    int pick = -1;
    for (int k = 0; k < nt; ++k)
      if (!done[k] && missing[k] == 0 && (pick < 0 || earlier_deadline(inst, k, pick))) pick = k;
    if (pick < 0) break;  // cycle; validated instances never get here
    g.place(pick);
    done[pick] = true;
    for (int k = 0; k < nt; ++k)
      if (k != pick && inst.precedence(pick, k) != 0) --missing[k];
  }
  return std::move(g).result();
}

}  // namespace mats
