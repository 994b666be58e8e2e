#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "aetsgd/error.hpp"
#include "aetsgd/text.hpp"

namespace aetsgd {

using NodeId = std::size_t;

// Undirected peer graph over nodes 0..n-1. Immutable once built; neighbor
// lists are sorted ascending so iteration order is deterministic.
class Topology {
 public:
  Topology() = default;

  static Topology from_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    Topology t;
    t.adj_.assign(n, {});
    for (const auto& [u, v] : edges) {
      if (u >= n || v >= n)
        throw ValidationError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references a node outside 0.." + std::to_string(n == 0 ? 0 : n - 1));
      if (u == v) throw ValidationError("self-loop on node " + std::to_string(u));
      t.adj_[u].push_back(v);
      t.adj_[v].push_back(u);
    }
    for (auto& list : t.adj_) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return t;
  }

  static Topology ring(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    if (n == 2) {
      edges.emplace_back(0, 1);
    } else if (n >= 3) {
      for (NodeId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    }
    return from_edges(n, edges);
  }

  static Topology line(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return from_edges(n, edges);
  }

  static Topology complete(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = i + 1; j < n; ++j) edges.emplace_back(i, j);
    return from_edges(n, edges);
  }

  std::size_t size() const { return adj_.size(); }

  const std::vector<NodeId>& neighbors(NodeId c) const {
    if (c >= adj_.size())
      throw ValidationError("node id " + std::to_string(c) + " out of range (n=" +
                            std::to_string(adj_.size()) + ")");
    return adj_[c];
  }

  bool adjacent(NodeId u, NodeId v) const {
    const auto& list = neighbors(u);
    return std::binary_search(list.begin(), list.end(), v);
  }

  // Each unordered pair once, u < v, sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId u = 0; u < adj_.size(); ++u)
      for (NodeId v : adj_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  std::size_t edge_count() const { return edges().size(); }

  bool is_connected() const {
    if (adj_.empty()) return true;
    std::vector<bool> seen(adj_.size(), false);
    std::vector<NodeId> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : adj_[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++visited;
          stack.push_back(v);
        }
      }
    }
    return visited == adj_.size();
  }

 private:
  std::vector<std::vector<NodeId>> adj_;
};

// Edge-list text: one "u v" pair per line; blank lines and '#' comments are
// skipped. Node count is max id + 1 unless `n` is given.
inline Topology parse_edge_list(std::istream& in, std::size_t n = 0) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::string line;
  std::size_t lineno = 0;
  std::size_t max_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = std::string_view(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    const auto tok = text::tokens(body);
    if (tok.empty()) continue;
    if (tok.size() != 2)
      throw ValidationError("edge list line " + std::to_string(lineno) + ": expected 'u v'");
    const auto where = "edge list line " + std::to_string(lineno);
    const NodeId u = text::parse_u64(tok[0], where);
    const NodeId v = text::parse_u64(tok[1], where);
    max_id = std::max({max_id, u, v});
    edges.emplace_back(u, v);
  }
  if (n == 0) n = edges.empty() ? 0 : max_id + 1;
  return Topology::from_edges(n, edges);
}

}  // namespace aetsgd
