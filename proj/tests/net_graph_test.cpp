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


#include "p2pfl/net_graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

namespace p2pfl {
namespace {

// Degrees 2, 4, 2, 3, 3.
DpGraph FiveNodeGraph() {
  return DpGraph(5, {{0, 1}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 3}, {3, 4}});
}

DpGraph RandomGraph(std::mt19937_64& rng, std::size_t k, double p) {
  std::bernoulli_distribution edge(p);
  std::vector<Edge> edges;
  for (NodeId a = 0; a < k; ++a) {
    for (NodeId b = a + 1; b < k; ++b) {
      if (edge(rng)) edges.push_back({a, b});
    }
  }
  return DpGraph(k, edges);
}

TEST(DpGraphTest, RejectsSelfLoopsAndOutOfRangeIds) {
  EXPECT_THROW(DpGraph(3, {{1, 1}}), InvalidArgument);
  EXPECT_THROW(DpGraph(3, {{0, 3}}), InvalidArgument);
  EXPECT_THROW(DpGraph(3, {}, {true, false}), InvalidArgument);
}

TEST(DpGraphTest, EdgesAreSymmetricAndDeduplicated) {
  DpGraph g(3, {{0, 1}, {1, 0}, {2, 1}});
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_TRUE(g.adjacent(1, 0));
  EXPECT_TRUE(g.adjacent(0, 1));
  EXPECT_FALSE(g.adjacent(0, 2));
}

TEST(DegreeTest, PathCompleteAndIsolated) {
  EXPECT_EQ(degree(DpGraph::path(5), 2), 2u);
  const DpGraph k5 = DpGraph::complete(5);
  for (NodeId n = 0; n < 5; ++n) EXPECT_EQ(degree(k5, n), 4u);
  EXPECT_EQ(degree(DpGraph(3, {{0, 1}}), 2), 0u);
  EXPECT_THROW(degree(k5, 5), InvalidArgument);
}

TEST(ElectAggregatorTest, UniqueMaximumWins) {
  EXPECT_EQ(elect_aggregator(FiveNodeGraph(), 0, {}), 1u);
}

TEST(ElectAggregatorTest, TiesGoToLowestId) {
  EXPECT_EQ(elect_aggregator(DpGraph::complete(3), 0, {}), 0u);
}

TEST(ElectAggregatorTest, RotationWindowLeavesOnlyNodeTwo) {
  // Window = min(4, K - 1) = 4 excludes 1, 3, 4 and 0.
  EXPECT_EQ(elect_aggregator(FiveNodeGraph(), 4, {1, 3, 4, 0}), 2u);
}

TEST(ElectAggregatorTest, Errors) {
  try {
    elect_aggregator(DpGraph(3, {}), 0, {});
    FAIL() << "expected ElectionError";
  } catch (const ElectionError& e) {
    EXPECT_EQ(e.kind(), ElectionError::Kind::kNoCandidate);
  }
  // Node 2 is isolated and is the only one outside the window.
  try {
    elect_aggregator(DpGraph(3, {{0, 1}}), 2, {0, 1});
    FAIL() << "expected ElectionError";
  } catch (const ElectionError& e) {
    EXPECT_EQ(e.kind(), ElectionError::Kind::kExhausted);
  }
}

TEST(ElectAggregatorTest, IsPure) {
  const DpGraph g = FiveNodeGraph();
  const std::vector<NodeId> history{1, 3};
  EXPECT_EQ(elect_aggregator(g, 2, history), elect_aggregator(g, 2, history));
}

TEST(PlanRoundTest, CompleteGraphRoundZero) {
  std::vector<NodeId> history;
  const RoundPlan plan = plan_round(DpGraph::complete(5), 0, history);
  EXPECT_EQ(plan.aggregator, 0u);
  EXPECT_EQ(plan.providers, (std::vector<NodeId>{1, 2, 3, 4}));
  EXPECT_TRUE(plan.non_participants.empty());
  EXPECT_EQ(history, (std::vector<NodeId>{0}));
}

TEST(PlanRoundTest, PathGraphCentreAggregator) {
  const RoundPlan plan = plan_with_aggregator(DpGraph::path(5), 0, 2);
  EXPECT_EQ(plan.providers, (std::vector<NodeId>{1, 3}));
  EXPECT_EQ(plan.non_participants, (std::vector<NodeId>{0, 4}));
}

TEST(PlanRoundTest, StarSecondRoundPicksALeaf) {
  std::vector<NodeId> history{0};
  const RoundPlan plan = plan_round(DpGraph::star(5), 1, history);
  EXPECT_EQ(plan.aggregator, 1u);
  EXPECT_EQ(plan.providers, (std::vector<NodeId>{0}));
  EXPECT_EQ(plan.non_participants, (std::vector<NodeId>{2, 3, 4}));
}

TEST(PlanRoundTest, FiveNodeGraphRotation) {
  const DpGraph g = FiveNodeGraph();
  std::vector<NodeId> history;
  std::vector<std::size_t> dnp_sizes;
  for (std::size_t t = 0; t < 5; ++t) {
    dnp_sizes.push_back(plan_round(g, t, history).non_participants.size());
  }
  EXPECT_EQ(history, (std::vector<NodeId>{1, 3, 4, 0, 2}));
  EXPECT_EQ(dnp_sizes, (std::vector<std::size_t>{0, 1, 1, 2, 2}));
}

// Partition into {aggregator} + providers + DNP, exhaustively over random
// graphs of up to ten nodes.
TEST(PlanRoundProperty, ThreeWayPartition) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + trial % 9;
    const DpGraph g = RandomGraph(rng, k, 0.4);
    if (g.edge_count() == 0) continue;
    std::vector<NodeId> history;
    for (std::size_t t = 0; t < 2 * k; ++t) {
      RoundPlan plan;
      try {
        plan = plan_round(g, t, history);
      } catch (const ElectionError&) {
        break;  // isolated nodes can exhaust the window
      }
      std::multiset<NodeId> all(plan.providers.begin(), plan.providers.end());
      all.insert(plan.non_participants.begin(), plan.non_participants.end());
      all.insert(plan.aggregator);
      ASSERT_EQ(all.size(), k);
      for (NodeId n = 0; n < k; ++n) ASSERT_EQ(all.count(n), 1u);
      ASSERT_TRUE(std::is_sorted(plan.providers.begin(), plan.providers.end()));
      ASSERT_EQ(plan.providers, g.neighbors(plan.aggregator));
    }
  }
}

// When every node has an edge, K consecutive rounds visit every node once.
TEST(PlanRoundProperty, RotationCompleteness) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + trial % 9;
    const DpGraph g = RandomGraph(rng, k, 0.5);
    bool connected_nodes = true;
    for (NodeId n = 0; n < k; ++n) connected_nodes &= degree(g, n) > 0;
    if (!connected_nodes) continue;
    std::vector<NodeId> history;
    for (std::size_t t = 0; t < 3 * k; ++t) plan_round(g, t, history);
    for (std::size_t start = 0; start + k <= history.size(); ++start) {
      std::set<NodeId> window(history.begin() + start, history.begin() + start + k);
      ASSERT_EQ(window.size(), k);
    }
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

}  // namespace
}  // namespace p2pfl
