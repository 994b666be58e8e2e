#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/node.hpp"
#include "aetsgd/rng.hpp"
#include "aetsgd/topology.hpp"
#include "aetsgd/trace.hpp"

namespace aetsgd {

// Latencies in virtual milliseconds. Compute latency is per SGD iteration and
// is multiplied by the node's straggler factor; network latency is per message.
struct DelayModel {
  double compute_lo = 0.1;
  double compute_hi = 1.0;
  double network_lo = 0.1;
  double network_hi = 1.5;
  std::vector<double> straggler;  // per-node factor, empty = all 1

  void validate() const {
    if (!(compute_lo >= 0.0 && compute_lo <= compute_hi))
      throw ValidationError("compute delay: need 0 <= lo <= hi");
    if (!(network_lo >= 0.0 && network_lo <= network_hi))
      throw ValidationError("network delay: need 0 <= lo <= hi");
    for (double f : straggler)
      if (!(f >= 1.0)) throw ValidationError("straggler factors must be >= 1");
  }

  double factor(NodeId c) const { return c < straggler.size() ? straggler[c] : 1.0; }
  double mean_compute() const { return 0.5 * (compute_lo + compute_hi); }
};

// Min-heap on (time, seq). seq is a global insertion counter, so events at
// equal times pop in the order they were scheduled.
template <class Payload>
class EventQueue {
 public:
  struct Entry {
    double time;
    std::uint64_t seq;
    Payload payload;
  };

  void push(double time, Payload payload) { heap_.push(Entry{time, next_seq_++, std::move(payload)}); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  std::uint64_t scheduled() const { return next_seq_; }

  Entry pop() {
    Entry e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

namespace sim_event {
struct StepDone {
  NodeId node;
};
struct Deliver {
  NodeId node;
  Message msg;
};
struct Wake {
  NodeId node;
};
}  // namespace sim_event

using SimEventPayload = std::variant<sim_event::StepDone, sim_event::Deliver, sim_event::Wake>;

struct SimStats {
  double duration_ms = 0.0;  // virtual time of the last processed event
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t events_processed = 0;
  std::vector<double> finish_time;  // per node: when its last round ended
  std::vector<double> wait_time;    // per node: total virtual time blocked
};

struct SimResult {
  Trace trace;
  SimStats stats;
};

struct SimOptions {
  bool record_trace = true;
  // Called right after a node closes a round (before its messages are sent).
  std::function<void(const AetNode&, std::uint64_t round, double time)> on_round_end;
};

// Single-threaded discrete-event driver for a set of AetNodes. Delivery is
// reliable but not FIFO per link: each message draws its own latency.
class Simulator {
 public:
  Simulator(std::vector<AetNode> nodes, Topology topology, DelayModel delays, std::uint64_t seed,
            SimOptions options = {})
      : nodes_(std::move(nodes)), topology_(std::move(topology)), delays_(std::move(delays)),
        options_(std::move(options)), compute_rng_(make_rng(seed, StreamTag::kCompute)),
        network_rng_(make_rng(seed, StreamTag::kNetwork)) {
    delays_.validate();
    if (nodes_.size() != topology_.size()) throw ValidationError("node count does not match topology");
    for (NodeId c = 0; c < nodes_.size(); ++c) {
      if (nodes_[c].id() != c) throw ValidationError("nodes must be ordered by id");
      if (nodes_[c].neighbors() != topology_.neighbors(c))
        throw ValidationError("node " + std::to_string(c) + " neighbor list disagrees with topology");
    }
    if (delays_.straggler.size() < nodes_.size()) delays_.straggler.resize(nodes_.size(), 1.0);
    state_.assign(nodes_.size(), {});
  }

  void set_straggler(NodeId node, double factor) {
    if (node >= nodes_.size()) throw ValidationError("set_straggler: unknown node " + std::to_string(node));
    if (!(factor >= 1.0)) throw ValidationError("set_straggler: factor must be >= 1");
    delays_.straggler[node] = factor;
  }

  // Trace header fields the engine cannot know (seed, probabilities, ...) are
  // filled by the caller via this hook.
  void set_trace_meta(TraceMeta meta) { trace_.meta = std::move(meta); }

  SimResult run() {
    if (ran_) throw ProtocolError("Simulator::run may only be called once");
    ran_ = true;
    stats_.finish_time.assign(nodes_.size(), 0.0);
    stats_.wait_time.assign(nodes_.size(), 0.0);
    for (NodeId c = 0; c < nodes_.size(); ++c) advance(c);
    while (!queue_.empty()) {
      auto ev = queue_.pop();
      now_ = ev.time;
      ++stats_.events_processed;
      std::visit([this](auto& e) { handle(e); }, ev.payload);
    }
    stats_.duration_ms = now_;
    std::vector<NodeId> stuck;
    for (NodeId c = 0; c < nodes_.size(); ++c)
      if (!nodes_[c].finished()) stuck.push_back(c);
    if (!stuck.empty()) throw DeadlockError(deadlock_report(stuck));
    if (stats_.messages_sent != stats_.messages_delivered)
      throw ProtocolError("message conservation violated");
    return SimResult{std::move(trace_), std::move(stats_)};
  }

  const std::vector<AetNode>& nodes() const { return nodes_; }
  const Topology& topology() const { return topology_; }
  double now() const { return now_; }

 private:
  struct NodeRuntime {
    bool busy = false;
    bool waiting = false;
    bool wake_pending = false;
    bool done = false;
    double wait_since = 0.0;
  };

  void record(NodeId c, TraceEvent ev, std::uint64_t round, std::uint64_t h,
              std::optional<std::uint64_t> detail = std::nullopt) {
    if (options_.record_trace) trace_.records.push_back(TraceRecord{now_, c, ev, round, h, detail});
  }

  // Runs node c forward until it is computing, waiting, or done.
  void advance(NodeId c) {
    auto& node = nodes_[c];
    auto& rt = state_[c];
    while (true) {
      if (node.finished()) {
        if (!rt.done) {
          rt.done = true;
          stats_.finish_time[c] = now_;
        }
        return;
      }
      if (node.round_complete()) {
        const auto round = node.round();
        const auto quota = node.round_quota();
        auto msgs = node.end_of_round();
        record(c, TraceEvent::kRoundEnd, round, quota, quota);
        if (options_.on_round_end) options_.on_round_end(node, round, now_);
        const auto& nbrs = node.neighbors();
        for (std::size_t k = 0; k < msgs.size(); ++k) {
          const double latency = uniform_real(network_rng_, delays_.network_lo, delays_.network_hi);
          deliver(nbrs[k], std::move(msgs[k]), latency);
        }
        continue;
      }
      if (node.sync_enabled() && node.check_sync() == SyncDecision::kWait) {
        if (!rt.waiting) {
          rt.waiting = true;
          rt.wait_since = now_;
          record(c, TraceEvent::kWaitEnter, node.round(), node.local_step_index());
        }
        return;
      }
      if (rt.waiting) {
        rt.waiting = false;
        stats_.wait_time[c] += now_ - rt.wait_since;
        record(c, TraceEvent::kWaitExit, node.round(), node.local_step_index());
      }
      const double latency =
          uniform_real(compute_rng_, delays_.compute_lo, delays_.compute_hi) * delays_.factor(c);
      rt.busy = true;
      queue_.push(now_ + latency, sim_event::StepDone{c});
      return;
    }
  }

  void deliver(NodeId to, Message msg, double latency) {
    if (latency < 0.0) throw ValidationError("negative latency");
    ++stats_.messages_sent;
    queue_.push(now_ + latency, sim_event::Deliver{to, std::move(msg)});
  }

  void handle(sim_event::StepDone& e) {
    auto& node = nodes_[e.node];
    state_[e.node].busy = false;
    node.local_step();
    record(e.node, TraceEvent::kGrad, node.round(), node.local_step_index());
    advance(e.node);
  }

  void handle(sim_event::Deliver& e) {
    auto& node = nodes_[e.node];
    node.on_receive(e.msg);
    ++stats_.messages_delivered;
    record(e.node, TraceEvent::kApply, e.msg.round, node.local_step_index(), e.msg.sender);
    auto& rt = state_[e.node];
    if (rt.waiting && !rt.busy && !rt.wake_pending && node.check_sync() == SyncDecision::kProceed) {
      rt.wake_pending = true;
      queue_.push(now_, sim_event::Wake{e.node});
    }
  }

  void handle(sim_event::Wake& e) {
    state_[e.node].wake_pending = false;
    advance(e.node);
  }

  std::string deadlock_report(const std::vector<NodeId>& stuck) const {
    std::ostringstream os;
    os << "deadlock at t=" << now_ << "ms; blocked nodes:";
    for (NodeId c : stuck) {
      const auto& n = nodes_[c];
      os << " [node " << c << " round " << n.round() << " h " << n.local_step_index() << " lag " << n.lag()
         << " H{";
      for (std::size_t k = 0; k < n.neighbors().size(); ++k)
        os << (k ? "," : "") << n.neighbors()[k] << ':' << n.history(n.neighbors()[k]);
      os << "}]";
    }
    return os.str();
  }

  std::vector<AetNode> nodes_;
  Topology topology_;
  DelayModel delays_;
  SimOptions options_;
  Rng compute_rng_;
  Rng network_rng_;
  EventQueue<SimEventPayload> queue_;
  std::vector<NodeRuntime> state_;
  Trace trace_;
  SimStats stats_;
  double now_ = 0.0;
  bool ran_ = false;
};

}  // namespace aetsgd
