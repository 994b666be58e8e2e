#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/node.hpp"
#include "aetsgd/schedules.hpp"
#include "aetsgd/topology.hpp"
#include "aetsgd/trace.hpp"

namespace aetsgd {

// Position of a local computation on the single global iteration timeline:
//   rho(c, i, h) = sum_{l<i} s_l + (slot of the h-th occurrence of c in round i)
// with h 1-based. Backed by the Assignment it was built from.
class RhoMap {
 public:
  struct Label {
    NodeId node;
    std::uint64_t round;
    std::uint64_t h;
    bool operator==(const Label&) const = default;
  };

  explicit RhoMap(Assignment assignment) : a_(std::move(assignment)) {
    const std::size_t n = a_.nodes();
    positions_.resize(a_.rounds() * n);
    occurrence_.resize(a_.total());
    for (std::size_t i = 0; i < a_.rounds(); ++i) {
      for (std::uint64_t t = 0; t < a_.round_size(i); ++t) {
        const NodeId c = a_.slot(i, t);
        auto& pos = positions_[i * n + c];
        pos.push_back(t);
        occurrence_[a_.round_start(i) + t] = pos.size();
      }
    }
  }

  const Assignment& assignment() const { return a_; }
  std::uint64_t size() const { return a_.total(); }

  std::uint64_t rho(NodeId c, std::uint64_t round, std::uint64_t h) const {
    if (c >= a_.nodes()) throw ValidationError("rho: node out of range");
    if (round >= a_.rounds()) throw ValidationError("rho: round out of range");
    const auto& pos = positions_[round * a_.nodes() + c];
    if (h < 1 || h > pos.size())
      throw ValidationError("rho: h=" + std::to_string(h) + " outside 1.." + std::to_string(pos.size()));
    return a_.round_start(round) + pos[h - 1];
  }

  Label rho_inverse(std::uint64_t t) const {
    if (t >= a_.total()) throw ValidationError("rho_inverse: t out of range");
    std::size_t i = round_of(t);
    const std::uint64_t offset = t - a_.round_start(i);
    return Label{a_.slot(i, offset), i, occurrence_[t]};
  }

  // Largest i with sum_{l<i} s_l <= t (skipping empty rounds).
  std::size_t round_of(std::uint64_t t) const {
    std::size_t lo = 0;
    std::size_t hi = a_.rounds();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (a_.round_start(mid) <= t) lo = mid;
      else hi = mid;
    }
    while (lo + 1 < a_.rounds() && a_.round_start(lo + 1) <= t) ++lo;
    return lo;
  }

  // Slot offset of c's first computation in round i, if any.
  std::optional<std::uint64_t> first_slot(NodeId c, std::size_t i) const {
    const auto& pos = positions_[i * a_.nodes() + c];
    if (pos.empty()) return std::nullopt;
    return pos.front();
  }

 private:
  Assignment a_;
  std::vector<std::vector<std::uint64_t>> positions_;
  std::vector<std::uint64_t> occurrence_;
};

struct Violation {
  std::size_t record_index = 0;
  NodeId node = 0;
  std::uint64_t round = 0;
  std::uint64_t h = 0;
  NodeId neighbor = 0;
  std::uint64_t value = 0;  // observed lag (rounds) or offending neighbor round
  std::string what;
};

struct ConsistencyReport {
  bool ok = true;
  std::uint64_t checked = 0;
  std::vector<Violation> violations;
  // Computations by non-neighbors inside the window. They reach the node only
  // through its neighbors' sums, so they are counted, not flagged.
  std::uint64_t transitive_only = 0;
};

namespace detail {

inline std::vector<std::vector<NodeId>> trace_neighbors(const Trace& trace) {
  const auto topo = Topology::from_edges(trace.meta.nodes, trace.meta.edges);
  std::vector<std::vector<NodeId>> out(trace.meta.nodes);
  for (NodeId c = 0; c < trace.meta.nodes; ++c) out[c] = topo.neighbors(c);
  return out;
}

inline std::size_t slot_of(const std::vector<NodeId>& nbrs, NodeId e, std::size_t record) {
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), e);
  if (it == nbrs.end() || *it != e)
    throw ValidationError("malformed trace: record " + std::to_string(record) + " applies an update from non-neighbor " +
                          std::to_string(e));
  return static_cast<std::size_t>(it - nbrs.begin());
}

// Per node, grad records must advance (round, h) lexicographically with h
// starting at 1 in each round.
inline void check_grad_order(const Trace& trace) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> last(trace.meta.nodes, {0, 0});
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    if (r.event != TraceEvent::kGrad) continue;
    const auto prev = last[r.node];
    const bool next_in_round = r.round == prev.first && r.h == prev.second + 1;
    const bool new_round = r.round > prev.first && r.h == 1;
    if (!next_in_round && !new_round)
      throw ValidationError("malformed trace: record " + std::to_string(k) + " breaks (round,h) order at node " +
                            std::to_string(r.node));
    last[r.node] = {r.round, r.h};
  }
}

}  // namespace detail

// Every gradient computed by node c in round i must see, for each neighbor e,
// at least i - d applied messages from e (the receiver-side count H_e).
inline ConsistencyReport verify_round_delay(const Trace& trace, std::uint64_t max_lag) {
  detail::check_grad_order(trace);
  const auto nbrs = detail::trace_neighbors(trace);
  std::vector<std::vector<std::uint64_t>> received(trace.meta.nodes);
  for (NodeId c = 0; c < trace.meta.nodes; ++c) received[c].assign(nbrs[c].size(), 0);

  ConsistencyReport report;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    if (r.event == TraceEvent::kApply) {
      if (!r.detail) throw ValidationError("malformed trace: apply record " + std::to_string(k) + " has no sender");
      ++received[r.node][detail::slot_of(nbrs[r.node], *r.detail, k)];
    } else if (r.event == TraceEvent::kGrad) {
      ++report.checked;
      if (max_lag == kUnboundedDelay) continue;
      for (std::size_t s = 0; s < nbrs[r.node].size(); ++s) {
        const auto count = received[r.node][s];
        if (r.round > count && r.round - count > max_lag) {
          report.violations.push_back(Violation{k, r.node, r.round, r.h, nbrs[r.node][s], r.round - count,
                                                "round lag exceeds bound"});
        }
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

using DelayFn = std::function<double(double)>;

inline DelayFn constant_delay(double value) {
  return [value](double) { return value; };
}

inline DelayFn sqrt_log_delay() {
  return [](double t) { return tau(t); };
}

// Iteration-level staleness implied by a round bound d: a computation in
// round i is only guaranteed to see neighbor rounds < i - d, so everything
// from the start of round i - d up to the end of round i may be missing.
inline DelayFn induced_round_delay(const RhoMap& rho, std::uint64_t max_lag) {
  return [&rho, max_lag](double t) {
    const auto& a = rho.assignment();
    const auto ti = static_cast<std::uint64_t>(t);
    const std::size_t i = rho.round_of(ti);
    const std::size_t from = i >= max_lag ? i - max_lag : 0;
    return static_cast<double>(a.round_start(i) + a.round_size(i) - a.round_start(from));
  };
}

// Delay consistency: when node c computes the gradient labelled t = rho(c,i,h),
// every computation with global index <= t - tau(t) by c itself or by one of
// its neighbors must already be folded into c's model. Neighbor rounds count
// as folded in once c has applied that round's message.
inline ConsistencyReport verify_iteration_delay(const Trace& trace, const RhoMap& rho, const DelayFn& delay) {
  detail::check_grad_order(trace);
  const auto& a = rho.assignment();
  if (a.nodes() != trace.meta.nodes) throw ValidationError("trace and assignment disagree on node count");
  const auto nbrs = detail::trace_neighbors(trace);
  const std::size_t n = a.nodes();
  const std::size_t rounds = a.rounds();

  // last_nonempty[c][i]: the largest round <= i in which c has a slot, +1 (0 = none).
  std::vector<std::vector<std::size_t>> last_nonempty(n, std::vector<std::size_t>(rounds, 0));
  for (NodeId c = 0; c < n; ++c) {
    std::size_t last = 0;
    for (std::size_t i = 0; i < rounds; ++i) {
      if (a.count(i, c) > 0) last = i + 1;
      last_nonempty[c][i] = last;
    }
  }
  // applied[c][slot] is a per-round bitmap; prefix[c][slot] is the first
  // round of that neighbor that is neither applied nor empty.
  std::vector<std::vector<std::vector<bool>>> applied(n);
  std::vector<std::vector<std::size_t>> prefix(n);
  for (NodeId c = 0; c < n; ++c) {
    applied[c].assign(nbrs[c].size(), std::vector<bool>(rounds, false));
    prefix[c].assign(nbrs[c].size(), 0);
  }
  auto bump = [&](NodeId c, std::size_t s) {
    const NodeId e = nbrs[c][s];
    auto& p = prefix[c][s];
    while (p < rounds && (applied[c][s][p] || a.count(p, e) == 0)) ++p;
  };
  for (NodeId c = 0; c < n; ++c)
    for (std::size_t s = 0; s < nbrs[c].size(); ++s) bump(c, s);

  ConsistencyReport report;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& r = trace.records[k];
    if (r.event == TraceEvent::kApply) {
      if (!r.detail) throw ValidationError("malformed trace: apply record without sender");
      const std::size_t s = detail::slot_of(nbrs[r.node], *r.detail, k);
      if (r.round >= rounds) throw ValidationError("malformed trace: apply round beyond assignment");
      applied[r.node][s][r.round] = true;
      bump(r.node, s);
      continue;
    }
    if (r.event != TraceEvent::kGrad) continue;
    if (r.round >= rounds) throw ValidationError("malformed trace: grad round beyond assignment");
    ++report.checked;
    const std::uint64_t t = rho.rho(r.node, r.round, r.h);
    const double window = static_cast<double>(t) - delay(static_cast<double>(t));
    if (window < 0.0) continue;
    const auto bound = static_cast<std::uint64_t>(std::floor(window));
    const std::size_t bi = rho.round_of(bound);
    const std::uint64_t boff = bound - a.round_start(bi);

    // Latest round of node e holding a computation with index <= bound.
    auto needed = [&](NodeId e) -> std::optional<std::size_t> {
      const auto first = rho.first_slot(e, bi);
      if (first && *first <= boff) return bi;
      const std::size_t last = bi > 0 ? last_nonempty[e][bi - 1] : 0;
      if (last == 0) return std::nullopt;
      return last - 1;
    };

    for (std::size_t s = 0; s < nbrs[r.node].size(); ++s) {
      const NodeId e = nbrs[r.node][s];
      const auto need = needed(e);
      if (need && *need >= prefix[r.node][s]) {
        report.violations.push_back(Violation{k, r.node, r.round, r.h, e, prefix[r.node][s],
                                              "neighbor computation inside the window not yet applied"});
      }
    }
    for (NodeId e = 0; e < n; ++e) {
      if (e == r.node || std::binary_search(nbrs[r.node].begin(), nbrs[r.node].end(), e)) continue;
      if (needed(e)) ++report.transitive_only;
    }
  }
  report.ok = report.violations.empty();
  return report;
}

inline void write_report(std::ostream& out, const ConsistencyReport& report, std::string_view label) {
  out << label << ": " << (report.ok ? "ok" : "VIOLATIONS") << " (" << report.checked << " computations checked, "
      << report.violations.size() << " violations";
  if (report.transitive_only) out << ", " << report.transitive_only << " with transitive-only exposure";
  out << ")\n";
}

// Machine-readable violation list, same line-oriented convention as traces.
inline void write_violations(std::ostream& out, const ConsistencyReport& report) {
  out << "record,node,round,h,neighbor,value,what\n";
  for (const auto& v : report.violations)
    out << v.record_index << ',' << v.node << ',' << v.round << ',' << v.h << ',' << v.neighbor << ',' << v.value
        << ',' << v.what << '\n';
}

}  // namespace aetsgd
