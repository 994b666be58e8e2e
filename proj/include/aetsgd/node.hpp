#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/objectives.hpp"
#include "aetsgd/rng.hpp"
#include "aetsgd/schedules.hpp"
#include "aetsgd/topology.hpp"

namespace aetsgd {

// Global per-round quantities shared by every node: the round sizes s_i
// (summed over all nodes), their prefix sums, and the round step size
// eta_i = step_size(sched, sum_{l<i} s_l).
class RoundPlan {
 public:
  RoundPlan() = default;
  RoundPlan(std::vector<std::uint64_t> sizes, const StepSchedule& step) : sizes_(std::move(sizes)) {
    starts_.resize(sizes_.size() + 1, 0);
    for (std::size_t i = 0; i < sizes_.size(); ++i) starts_[i + 1] = starts_[i] + sizes_[i];
    steps_.resize(sizes_.size());
    for (std::size_t i = 0; i < sizes_.size(); ++i) steps_[i] = step_size(step, static_cast<double>(starts_[i]));
  }

  // Global sizes n * sample_size(sched, i) for i < rounds: each node's
  // expected share under uniform assignment is sample_size(sched, i).
  static RoundPlan per_node(const SampleSchedule& sched, std::uint64_t rounds, std::size_t n,
                            const StepSchedule& step) {
    std::vector<std::uint64_t> sizes(rounds);
    for (std::uint64_t i = 0; i < rounds; ++i) sizes[i] = n * sample_size(sched, i);
    return RoundPlan(std::move(sizes), step);
  }

  std::size_t rounds() const { return sizes_.size(); }
  std::uint64_t size(std::size_t i) const { return sizes_.at(i); }
  std::uint64_t start(std::size_t i) const { return starts_.at(i); }
  std::uint64_t total() const { return starts_.back(); }
  double step(std::size_t i) const { return steps_.at(i); }
  const std::vector<std::uint64_t>& sizes() const { return sizes_; }

 private:
  std::vector<std::uint64_t> sizes_;
  std::vector<std::uint64_t> starts_{0};
  std::vector<double> steps_;
};

// Slot-to-node labelling a(i, t) for every materialized round, plus the
// derived per-node counts s_{i,c}.
class Assignment {
 public:
  Assignment() = default;

  std::size_t nodes() const { return n_; }
  std::size_t rounds() const { return sizes_.size(); }
  const std::vector<std::uint64_t>& sizes() const { return sizes_; }
  std::uint64_t round_size(std::size_t i) const { return sizes_.at(i); }
  std::uint64_t round_start(std::size_t i) const { return starts_.at(i); }
  std::uint64_t total() const { return starts_.back(); }

  NodeId slot(std::size_t i, std::uint64_t t) const {
    if (t >= sizes_.at(i)) throw ValidationError("slot index out of range");
    return slots_[starts_[i] + t];
  }
  std::uint64_t count(std::size_t i, NodeId c) const { return counts_.at(i * n_ + c); }
  const std::vector<double>& probabilities() const { return probs_; }
  std::uint64_t seed() const { return seed_; }

  friend Assignment setup(std::size_t n, const std::vector<std::uint64_t>& sizes, const std::vector<double>& p,
                          std::uint64_t seed);

 private:
  std::size_t n_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> probs_;
  std::vector<std::uint64_t> sizes_;
  std::vector<std::uint64_t> starts_{0};
  std::vector<std::uint32_t> slots_;
  std::vector<std::uint64_t> counts_;
};

inline std::vector<double> uniform_probabilities(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// Draws a(i, t) = c with probability p_c for every slot, independently.
inline Assignment setup(std::size_t n, const std::vector<std::uint64_t>& sizes, const std::vector<double>& p,
                        std::uint64_t seed) {
  if (n == 0) throw ValidationError("setup: need at least one node");
  if (p.size() != n) throw ValidationError("setup: probability vector length must equal node count");
  double sum = 0.0;
  for (double pc : p) {
    if (!(pc >= 0.0)) throw ValidationError("setup: probabilities must be non-negative");
    sum += pc;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("setup: probabilities must sum to 1");

  std::vector<double> cdf(n);
  std::partial_sum(p.begin(), p.end(), cdf.begin());
  cdf.back() = 1.0;

  Assignment a;
  a.n_ = n;
  a.seed_ = seed;
  a.probs_ = p;
  a.sizes_ = sizes;
  a.starts_.assign(sizes.size() + 1, 0);
  for (std::size_t i = 0; i < sizes.size(); ++i) a.starts_[i + 1] = a.starts_[i] + sizes[i];
  a.slots_.resize(a.starts_.back());
  a.counts_.assign(sizes.size() * n, 0);
  auto rng = make_rng(seed, StreamTag::kSetup);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    for (std::uint64_t t = 0; t < sizes[i]; ++t) {
      NodeId c = 0;
      if (n > 1) {
        const double u = uniform01(rng);
        c = static_cast<NodeId>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        // Rounding in the cdf can leave u past the last positive bucket.
        if (c >= n) c = n - 1;
        while (c > 0 && p[c] == 0.0) --c;
      }
      a.slots_[a.starts_[i] + t] = static_cast<std::uint32_t>(c);
      ++a.counts_[i * n + c];
    }
  }
  return a;
}

inline Assignment setup(std::size_t n, const SampleSchedule& sched, const std::vector<double>& p,
                        std::uint64_t seed, std::uint64_t rounds) {
  std::vector<std::uint64_t> sizes(rounds);
  for (std::uint64_t i = 0; i < rounds; ++i) sizes[i] = sample_size(sched, i);
  return setup(n, sizes, p, seed);
}

// The broadcast tuple (sender, gradient sum, sender round). The payload is
// shared and immutable, so one allocation serves every neighbor.
struct Message {
  NodeId sender = 0;
  std::shared_ptr<const Vector> payload;
  std::uint64_t round = 0;
};

enum class SyncDecision { kProceed, kWait };

inline constexpr std::uint64_t kUnboundedDelay = std::numeric_limits<std::uint64_t>::max();

// Immutable inputs a node computes against.
struct NodeEnv {
  std::shared_ptr<const Objective> objective;
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const std::vector<std::size_t>> local_indices;  // D_c
  std::shared_ptr<const RoundPlan> plan;
  std::shared_ptr<const Assignment> assignment;
};

// One compute node running the event-triggered protocol: local SGD for
// s_{i,c} steps, broadcast the gradient sum, apply neighbors' sums on
// arrival, and hold at the delay checkpoint while i - H_e > d.
class AetNode {
 public:
  AetNode(NodeId id, std::vector<NodeId> neighbors, NodeEnv env, Vector w0, std::uint64_t max_lag,
          std::uint64_t seed)
      : id_(id), neighbors_(std::move(neighbors)), env_(std::move(env)), w_(std::move(w0)), max_lag_(max_lag),
        rng_(make_rng(seed, StreamTag::kSampling, id)) {
    if (!env_.objective || !env_.data || !env_.local_indices || !env_.plan || !env_.assignment)
      throw ValidationError("node env is incomplete");
    if (w_.size() != env_.objective->model_dim())
      throw ValidationError("initial model dimension mismatch");
    if (env_.local_indices->empty()) throw ValidationError("node " + std::to_string(id) + " has no local data");
    if (env_.assignment->rounds() != env_.plan->rounds())
      throw ValidationError("assignment and round plan disagree on round count");
    if (id_ >= env_.assignment->nodes()) throw ValidationError("node id outside assignment");
    std::sort(neighbors_.begin(), neighbors_.end());
    history_.assign(neighbors_.size(), 0);
    u_.assign(w_.size(), 0.0);
  }

  NodeId id() const { return id_; }
  const std::vector<NodeId>& neighbors() const { return neighbors_; }
  const Vector& model() const { return w_; }
  const Vector& gradient_sum() const { return u_; }
  std::uint64_t round() const { return round_; }
  std::uint64_t local_step_index() const { return h_; }
  std::uint64_t total_rounds() const { return env_.plan->rounds(); }
  std::uint64_t max_lag() const { return max_lag_; }
  std::uint64_t iterations() const { return iterations_; }
  bool finished() const { return round_ >= total_rounds(); }

  // s_{i,c} for the current round (0 once finished).
  std::uint64_t round_quota() const { return finished() ? 0 : env_.assignment->count(round_, id_); }
  bool round_complete() const { return !finished() && h_ == round_quota(); }

  // Messages received from neighbor e (H_e).
  std::uint64_t history(NodeId e) const { return history_[neighbor_slot(e)]; }

  // Disabling the checkpoint exists only for fault-injection tests.
  void set_sync_enabled(bool enabled) { sync_enabled_ = enabled; }
  bool sync_enabled() const { return sync_enabled_; }

  void on_receive(const Message& msg) {
    const std::size_t slot = neighbor_slot(msg.sender);
    if (!msg.payload || msg.payload->size() != w_.size()) throw ProtocolError("message payload dimension mismatch");
    if (msg.round >= total_rounds()) throw ProtocolError("message round beyond the round plan");
    const double eta = env_.plan->step(msg.round);
    const Vector& u = *msg.payload;
    for (std::size_t j = 0; j < w_.size(); ++j) w_[j] -= eta * u[j];
    ++history_[slot];
  }

  // d_c = max_e (i - H_e), 0 with no neighbors; wait iff d_c > d.
  std::uint64_t lag() const {
    std::uint64_t dc = 0;
    for (std::uint64_t he : history_)
      if (round_ > he) dc = std::max(dc, round_ - he);
    return dc;
  }

  SyncDecision check_sync() const {
    if (max_lag_ == kUnboundedDelay) return SyncDecision::kProceed;
    return lag() > max_lag_ ? SyncDecision::kWait : SyncDecision::kProceed;
  }

  // One SGD step on a sample drawn uniformly (with replacement) from D_c.
  // Returns the dataset index used.
  std::size_t local_step() {
    if (finished() || h_ >= round_quota()) throw ProtocolError("local_step: round exhausted");
    if (sync_enabled_ && check_sync() == SyncDecision::kWait)
      throw ProtocolError("local_step: delay checkpoint says wait");
    const auto& local = *env_.local_indices;
    const std::size_t idx = local[uniform_index(rng_, local.size())];
    grad_into(*env_.objective, w_, *env_.data, idx, g_);
    const double eta = env_.plan->step(round_);
    for (std::size_t j = 0; j < w_.size(); ++j) {
      w_[j] -= eta * g_[j];
      u_[j] += g_[j];
    }
    ++h_;
    ++iterations_;
    return idx;
  }

  // Builds the (c, U_i, i) tuple for every neighbor, then opens round i+1.
  std::vector<Message> end_of_round() {
    if (!round_complete()) throw ProtocolError("end_of_round: round not complete");
    auto payload = std::make_shared<const Vector>(std::move(u_));
    std::vector<Message> out;
    out.reserve(neighbors_.size());
    for (std::size_t k = 0; k < neighbors_.size(); ++k) out.push_back(Message{id_, payload, round_});
    ++round_;
    h_ = 0;
    u_.assign(w_.size(), 0.0);
    return out;
  }

 private:
  std::size_t neighbor_slot(NodeId e) const {
    const auto it = std::lower_bound(neighbors_.begin(), neighbors_.end(), e);
    if (it == neighbors_.end() || *it != e)
      throw ProtocolError("node " + std::to_string(id_) + " got a message from non-neighbor " + std::to_string(e));
    return static_cast<std::size_t>(it - neighbors_.begin());
  }

  NodeId id_;
  std::vector<NodeId> neighbors_;
  NodeEnv env_;
  Vector w_;
  Vector u_;
  Vector g_;
  std::vector<std::uint64_t> history_;
  std::uint64_t max_lag_;
  std::uint64_t round_ = 0;
  std::uint64_t h_ = 0;
  std::uint64_t iterations_ = 0;
  bool sync_enabled_ = true;
  Rng rng_;
};

}  // namespace aetsgd
