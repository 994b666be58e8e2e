#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/node.hpp"
#include "aetsgd/objectives.hpp"
#include "aetsgd/rng.hpp"
#include "aetsgd/schedules.hpp"
#include "aetsgd/simnet.hpp"
#include "aetsgd/topology.hpp"

namespace aetsgd {

// ---------------------------------------------------------------------------
// Norm-threshold event-triggered SGD. Each node keeps the model it last
// broadcast and the last model it heard from every neighbor:
//   w <- w - alpha(t) * grad f(w; xi) + beta(t) * sum_j (w_hat_j - w)
// and broadcasts its full model whenever ||w - w_hat_self||_1 exceeds
// alpha(t) * coeff * N_p.
// ---------------------------------------------------------------------------

struct ThresholdParams {
  double eta0 = 0.01;
  double epsilon = 1e-5;
  double coeff = 0.2;  // v0 = coeff * N_p
};

struct ModelBroadcast {
  NodeId sender = 0;
  std::uint64_t version = 0;
  std::shared_ptr<const Vector> model;
};

class ThresholdNode {
 public:
  ThresholdNode(NodeId id, std::vector<NodeId> neighbors, std::shared_ptr<const Objective> objective,
                std::shared_ptr<const Dataset> data, std::shared_ptr<const std::vector<std::size_t>> local_indices,
                Vector w0, ThresholdParams params, std::uint64_t seed)
      : id_(id), neighbors_(std::move(neighbors)), objective_(std::move(objective)), data_(std::move(data)),
        local_(std::move(local_indices)), w_(std::move(w0)), params_(params),
        rng_(make_rng(seed, StreamTag::kSampling, id)) {
    if (!(params_.coeff > 0.0 && params_.coeff <= 1.0)) throw ValidationError("threshold coeff must be in (0, 1]");
    if (!(params_.eta0 > 0.0) || !(params_.epsilon > 0.0))
      throw ValidationError("threshold baseline: eta0 and epsilon must be positive");
    if (!objective_ || !data_ || !local_ || local_->empty()) throw ValidationError("threshold node env incomplete");
    if (w_.size() != objective_->model_dim()) throw ValidationError("initial model dimension mismatch");
    std::sort(neighbors_.begin(), neighbors_.end());
    w_self_ = w_;
    w_nbr_.assign(neighbors_.size(), w_);
    versions_.assign(neighbors_.size(), 0);
  }

  NodeId id() const { return id_; }
  const std::vector<NodeId>& neighbors() const { return neighbors_; }
  const Vector& model() const { return w_; }
  const Vector& last_broadcast() const { return w_self_; }
  std::uint64_t iterations() const { return t_; }
  std::uint64_t broadcasts() const { return broadcasts_; }
  std::size_t parameter_count() const { return w_.size(); }

  double alpha() const { return step_size(BaselineAlphaStep{params_.eta0, params_.epsilon}, static_cast<double>(t_)); }
  double beta() const { return step_size(BaselineBetaStep{params_.eta0, params_.epsilon}, static_cast<double>(t_)); }
  double threshold() const { return alpha() * params_.coeff * static_cast<double>(w_.size()); }

  // Overrides the stored copy of neighbor j's model (test hook and delivery path).
  void set_neighbor_model(NodeId j, Vector model) { w_nbr_[slot(j)] = std::move(model); }

  void step() {
    const auto& local = *local_;
    const std::size_t idx = local[uniform_index(rng_, local.size())];
    grad_into(*objective_, w_, *data_, idx, g_);
    const double a = alpha();
    const double b = beta();
    consensus_.assign(w_.size(), 0.0);
    for (const auto& wj : w_nbr_)
      for (std::size_t k = 0; k < w_.size(); ++k) consensus_[k] += wj[k] - w_[k];
    for (std::size_t k = 0; k < w_.size(); ++k) w_[k] += -a * g_[k] + b * consensus_[k];
    ++t_;
  }

  double drift() const {
    double s = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) s += std::abs(w_[k] - w_self_[k]);
    return s;
  }

  bool should_broadcast() const { return drift() > threshold(); }

  ModelBroadcast broadcast() {
    w_self_ = w_;
    ++broadcasts_;
    return ModelBroadcast{id_, broadcasts_, std::make_shared<const Vector>(w_)};
  }

  // Out-of-order deliveries never roll a neighbor's copy backwards.
  void on_receive(const ModelBroadcast& msg) {
    const std::size_t s = slot(msg.sender);
    if (msg.version <= versions_[s]) return;
    versions_[s] = msg.version;
    w_nbr_[s] = *msg.model;
  }

 private:
  std::size_t slot(NodeId j) const {
    const auto it = std::lower_bound(neighbors_.begin(), neighbors_.end(), j);
    if (it == neighbors_.end() || *it != j) throw ProtocolError("threshold node: unknown neighbor");
    return static_cast<std::size_t>(it - neighbors_.begin());
  }

  NodeId id_;
  std::vector<NodeId> neighbors_;
  std::shared_ptr<const Objective> objective_;
  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const std::vector<std::size_t>> local_;
  Vector w_;
  Vector w_self_;
  std::vector<Vector> w_nbr_;
  std::vector<std::uint64_t> versions_;
  Vector g_;
  Vector consensus_;
  ThresholdParams params_;
  std::uint64_t t_ = 0;
  std::uint64_t broadcasts_ = 0;
  Rng rng_;
};

struct ThresholdRunStats {
  double duration_ms = 0.0;
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::vector<std::uint64_t> broadcasts;  // per node
};

// Drives threshold nodes for `iterations` steps each on the same latency
// model as the event-triggered engine. No delay checkpoint: nodes never wait.
inline ThresholdRunStats run_threshold(
    std::vector<ThresholdNode>& nodes, const Topology& topology, const DelayModel& delays, std::uint64_t seed,
    std::uint64_t iterations,
    const std::function<void(const ThresholdNode&, double time)>& on_step = {}) {
  delays.validate();
  if (nodes.size() != topology.size()) throw ValidationError("node count does not match topology");
  struct StepDone {
    NodeId node;
  };
  struct Deliver {
    NodeId node;
    ModelBroadcast msg;
  };
  EventQueue<std::variant<StepDone, Deliver>> queue;
  auto compute_rng = make_rng(seed, StreamTag::kCompute);
  auto network_rng = make_rng(seed, StreamTag::kNetwork);
  double now = 0.0;
  ThresholdRunStats stats;
  auto schedule_step = [&](NodeId c) {
    const double lat = uniform_real(compute_rng, delays.compute_lo, delays.compute_hi) * delays.factor(c);
    queue.push(now + lat, StepDone{c});
  };
  for (NodeId c = 0; c < nodes.size(); ++c)
    if (iterations > 0) schedule_step(c);
  while (!queue.empty()) {
    auto ev = queue.pop();
    now = ev.time;
    if (auto* s = std::get_if<StepDone>(&ev.payload)) {
      auto& node = nodes[s->node];
      node.step();
      if (on_step) on_step(node, now);
      if (node.should_broadcast()) {
        const auto msg = node.broadcast();
        for (NodeId j : node.neighbors()) {
          const double lat = uniform_real(network_rng, delays.network_lo, delays.network_hi);
          ++stats.messages_sent;
          queue.push(now + lat, Deliver{j, msg});
        }
      }
      if (node.iterations() < iterations) schedule_step(s->node);
    } else {
      auto& d = std::get<Deliver>(ev.payload);
      nodes[d.node].on_receive(d.msg);
      ++stats.messages_delivered;
    }
  }
  stats.duration_ms = now;
  for (const auto& node : nodes) stats.broadcasts.push_back(node.broadcasts());
  return stats;
}

// ---------------------------------------------------------------------------
// Constant local SGD: the event-triggered node with a Constant(s) schedule.
// ---------------------------------------------------------------------------

inline SampleSchedule constant_local_schedule(std::uint64_t s) {
  SampleSchedule sched = ConstantSamples{s};
  validate(sched);
  return sched;
}

// ---------------------------------------------------------------------------
// Serial SGD reference (n = 1). Step sizes are held constant within each
// round of `samples`, exactly as a single event-triggered node would see
// them, so the two produce identical trajectories for the same seed.
// ---------------------------------------------------------------------------

struct SerialResult {
  Vector w;
  std::vector<double> loss_curve;  // dataset loss after each completed round
};

inline SerialResult serial_sgd(const Objective& objective, const Dataset& data, std::uint64_t iterations,
                               const SampleSchedule& samples, const StepSchedule& steps, std::uint64_t seed,
                               Vector w0 = {}) {
  if (w0.empty()) w0.assign(objective.model_dim(), 0.0);
  SerialResult out{std::move(w0), {}};
  auto rng = make_rng(seed, StreamTag::kSampling, 0);
  Vector g;
  std::uint64_t t = 0;
  for (std::uint64_t round = 0; t < iterations; ++round) {
    const double eta = step_size(steps, static_cast<double>(t));
    const std::uint64_t s = sample_size(samples, round);
    for (std::uint64_t h = 0; h < s && t < iterations; ++h, ++t) {
      const std::size_t idx = uniform_index(rng, data.size());
      grad_into(objective, out.w, data, idx, g);
      for (std::size_t j = 0; j < g.size(); ++j) out.w[j] -= eta * g[j];
    }
    out.loss_curve.push_back(loss(objective, out.w, data));
  }
  return out;
}

}  // namespace aetsgd
