// Copyright 2026 The p2pfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "p2pfl/errors.hpp"

namespace p2pfl {

using NodeId = std::size_t;

struct Edge {
  NodeId a = 0;
  NodeId b = 0;
};

// Undirected connectivity graph where every node carries a flag saying whether
// it perturbs its own updates before sending them. Immutable once built.
class DpGraph {
 public:
  DpGraph() = default;

  // An empty `dp_flags` means "no node applies DP". Duplicate edges collapse.
  DpGraph(std::size_t node_count, const std::vector<Edge>& edges,
          std::vector<bool> dp_flags = {})
      : adjacency_(node_count), dp_flags_(std::move(dp_flags)) {
    if (node_count == 0) throw InvalidArgument("DpGraph: node count must be > 0");
    if (dp_flags_.empty()) dp_flags_.assign(node_count, false);
    if (dp_flags_.size() != node_count) {
      throw InvalidArgument("DpGraph: expected " + std::to_string(node_count) +
                            " dp flags, got " +
                            std::to_string(dp_flags_.size()));
    }
    for (const Edge& e : edges) {
      if (e.a >= node_count || e.b >= node_count) {
        throw InvalidArgument("DpGraph: edge (" + std::to_string(e.a) + ", " +
                              std::to_string(e.b) + ") out of range [0, " +
                              std::to_string(node_count) + ")");
      }
      if (e.a == e.b) {
        throw InvalidArgument("DpGraph: self-loop on node " +
                              std::to_string(e.a));
      }
      adjacency_[e.a].push_back(e.b);
      adjacency_[e.b].push_back(e.a);
    }
    for (auto& n : adjacency_) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
  }

  std::size_t node_count() const { return adjacency_.size(); }

  const std::vector<NodeId>& neighbors(NodeId node) const {
    check(node);
    return adjacency_[node];
  }

  bool dp_flag(NodeId node) const {
    check(node);
    return dp_flags_[node];
  }

  const std::vector<bool>& dp_flags() const { return dp_flags_; }

  bool adjacent(NodeId a, NodeId b) const {
    const auto& n = neighbors(a);
    return std::binary_search(n.begin(), n.end(), b);
  }

  // Each undirected edge once, as (low, high), sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (NodeId a = 0; a < adjacency_.size(); ++a) {
      for (NodeId b : adjacency_[a]) {
        if (a < b) out.push_back({a, b});
      }
    }
    return out;
  }

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& n : adjacency_) twice += n.size();
    return twice / 2;
  }

  void check(NodeId node) const {
    if (node >= adjacency_.size()) {
      throw InvalidArgument("node id " + std::to_string(node) +
                            " out of range [0, " +
                            std::to_string(adjacency_.size()) + ")");
    }
  }

  static DpGraph complete(std::size_t k, std::vector<bool> dp_flags = {}) {
    std::vector<Edge> edges;
    for (NodeId a = 0; a < k; ++a) {
      for (NodeId b = a + 1; b < k; ++b) edges.push_back({a, b});
    }
    return DpGraph(k, edges, std::move(dp_flags));
  }

  static DpGraph path(std::size_t k, std::vector<bool> dp_flags = {}) {
    std::vector<Edge> edges;
    for (NodeId a = 0; a + 1 < k; ++a) edges.push_back({a, a + 1});
    return DpGraph(k, edges, std::move(dp_flags));
  }

  static DpGraph star(std::size_t k, std::vector<bool> dp_flags = {}) {
    std::vector<Edge> edges;
    for (NodeId b = 1; b < k; ++b) edges.push_back({0, b});
    return DpGraph(k, edges, std::move(dp_flags));
  }

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<bool> dp_flags_;
};

// One round's cast. Providers are the aggregator's neighbours; everyone else
// does not participate (DNP).
struct RoundPlan {
  std::size_t round_index = 0;
  NodeId aggregator = 0;
  std::vector<NodeId> providers;
  std::vector<NodeId> non_participants;

  bool operator==(const RoundPlan&) const = default;
};

inline std::size_t degree(const DpGraph& graph, NodeId node) {
  return graph.neighbors(node).size();
}

// Highest-degree node among those that did not aggregate in the last
// min(|history|, K-1) rounds; ties go to the lowest id. Isolated nodes are
// never eligible.
inline NodeId elect_aggregator(const DpGraph& graph,
                               [[maybe_unused]] std::size_t round_index,
                               const std::vector<NodeId>& history) {
  const std::size_t k = graph.node_count();
  if (graph.edge_count() == 0) {
    throw ElectionError(ElectionError::Kind::kNoCandidate,
                        "elect_aggregator: graph has no edges");
  }
  const std::size_t window = std::min(history.size(), k - 1);
  std::vector<bool> excluded(k, false);
  for (std::size_t i = history.size() - window; i < history.size(); ++i) {
    graph.check(history[i]);
    excluded[history[i]] = true;
  }

  bool found = false;
  NodeId best = 0;
  std::size_t best_degree = 0;
  for (NodeId n = 0; n < k; ++n) {
    const std::size_t d = degree(graph, n);
    if (excluded[n] || d == 0) continue;
    if (!found || d > best_degree) {
      found = true;
      best = n;
      best_degree = d;
    }
  }
  if (!found) {
    throw ElectionError(ElectionError::Kind::kExhausted,
                        "elect_aggregator: every connected node is inside the "
                        "rotation window");
  }
  return best;
}

// Plan with a fixed aggregator; also the building block of plan_round.
inline RoundPlan plan_with_aggregator(const DpGraph& graph,
                                      std::size_t round_index,
                                      NodeId aggregator) {
  RoundPlan plan;
  plan.round_index = round_index;
  plan.aggregator = aggregator;
  plan.providers = graph.neighbors(aggregator);
  for (NodeId n = 0; n < graph.node_count(); ++n) {
    if (n != aggregator && !graph.adjacent(aggregator, n)) {
      plan.non_participants.push_back(n);
    }
  }
  return plan;
}

// Elects this round's aggregator and records it in `history`.
inline RoundPlan plan_round(const DpGraph& graph, std::size_t round_index,
                            std::vector<NodeId>& history) {
  const NodeId aggregator = elect_aggregator(graph, round_index, history);
  history.push_back(aggregator);
  return plan_with_aggregator(graph, round_index, aggregator);
}

}  // namespace p2pfl
