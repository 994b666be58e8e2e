#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/text.hpp"
#include "aetsgd/topology.hpp"

namespace aetsgd {

enum class TraceEvent { kGrad, kApply, kRoundEnd, kWaitEnter, kWaitExit };

inline const char* to_string(TraceEvent e) {
  switch (e) {
    case TraceEvent::kGrad: return "grad";
    case TraceEvent::kApply: return "apply";
    case TraceEvent::kRoundEnd: return "round_end";
    case TraceEvent::kWaitEnter: return "wait_enter";
    case TraceEvent::kWaitExit: return "wait_exit";
  }
  return "?";
}

// One line of the trace.
//   grad:       node computed its h-th gradient (1-based) of `round`.
//   apply:      node applied the gradient sum of `round` sent by `detail`.
//   round_end:  node finished `round` with h = detail = s_{round,node} steps.
//   wait_enter / wait_exit: node blocked / unblocked at the delay checkpoint.
struct TraceRecord {
  double time = 0.0;
  NodeId node = 0;
  TraceEvent event = TraceEvent::kGrad;
  std::uint64_t round = 0;
  std::uint64_t h = 0;
  std::optional<std::uint64_t> detail;

  bool operator==(const TraceRecord&) const = default;
};

// Context needed to interpret a trace offline: the peer graph, the delay
// bound the run used, and what is needed to rebuild the slot assignment.
struct TraceMeta {
  std::size_t nodes = 0;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::optional<std::uint64_t> max_lag;  // empty = unbounded
  std::uint64_t assignment_seed = 0;
  std::vector<double> probabilities;
  std::vector<std::uint64_t> round_sizes;

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<TraceRecord> records;
};

inline constexpr const char* kTraceColumns = "time,node,event,round,h,detail";

inline void write_trace(std::ostream& out, const Trace& trace) {
  const auto& m = trace.meta;
  out << "# aetsgd-trace 1\n";
  out << "# nodes " << m.nodes << '\n';
  for (const auto& [u, v] : m.edges) out << "# edge " << u << ' ' << v << '\n';
  out << "# d " << (m.max_lag ? std::to_string(*m.max_lag) : std::string("inf")) << '\n';
  out << "# assignment-seed " << m.assignment_seed << '\n';
  out << "# probs";
  for (double p : m.probabilities) out << ' ' << text::format_double(p);
  out << '\n';
  out << "# round-sizes";
  for (auto s : m.round_sizes) out << ' ' << s;
  out << '\n';
  out << kTraceColumns << '\n';
  for (const auto& r : trace.records) {
    out << text::format_double(r.time) << ',' << r.node << ',' << to_string(r.event) << ',' << r.round << ','
        << r.h << ',';
    if (r.detail) out << *r.detail;
    out << '\n';
  }
}

inline Trace read_trace(std::istream& in) {
  Trace trace;
  auto& m = trace.meta;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  bool saw_magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = "trace line " + std::to_string(lineno);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      const auto tok = text::tokens(body.substr(1));
      if (tok.empty()) continue;
      if (tok[0] == "aetsgd-trace") {
        saw_magic = true;
      } else if (tok[0] == "nodes" && tok.size() == 2) {
        m.nodes = text::parse_u64(tok[1], where);
      } else if (tok[0] == "edge" && tok.size() == 3) {
        m.edges.emplace_back(text::parse_u64(tok[1], where), text::parse_u64(tok[2], where));
      } else if (tok[0] == "d" && tok.size() == 2) {
        if (tok[1] == "inf") m.max_lag.reset();
        else m.max_lag = text::parse_u64(tok[1], where);
      } else if (tok[0] == "assignment-seed" && tok.size() == 2) {
        m.assignment_seed = text::parse_u64(tok[1], where);
      } else if (tok[0] == "probs") {
        for (std::size_t k = 1; k < tok.size(); ++k) m.probabilities.push_back(text::parse_double(tok[k], where));
      } else if (tok[0] == "round-sizes") {
        for (std::size_t k = 1; k < tok.size(); ++k) m.round_sizes.push_back(text::parse_u64(tok[k], where));
      }
      continue;
    }
    if (!saw_header) {
      if (body != kTraceColumns) throw ValidationError(where + ": expected column header '" + kTraceColumns + "'");
      saw_header = true;
      continue;
    }
    const auto f = text::split(body, ',');
    if (f.size() != 6) throw ValidationError(where + ": expected 6 fields");
    TraceRecord r;
    r.time = text::parse_double(f[0], where);
    r.node = text::parse_u64(f[1], where);
    if (f[2] == "grad") r.event = TraceEvent::kGrad;
    else if (f[2] == "apply") r.event = TraceEvent::kApply;
    else if (f[2] == "round_end") r.event = TraceEvent::kRoundEnd;
    else if (f[2] == "wait_enter") r.event = TraceEvent::kWaitEnter;
    else if (f[2] == "wait_exit") r.event = TraceEvent::kWaitExit;
    else throw ValidationError(where + ": unknown event '" + std::string(f[2]) + "'");
    r.round = text::parse_u64(f[3], where);
    r.h = text::parse_u64(f[4], where);
    if (!f[5].empty()) r.detail = text::parse_u64(f[5], where);
    if (r.node >= m.nodes) throw ValidationError(where + ": node id outside the declared node count");
    trace.records.push_back(r);
  }
  if (!saw_magic || !saw_header) throw ValidationError("not an aetsgd trace (missing header)");
  return trace;
}

}  // namespace aetsgd
