#include <gtest/gtest.h>

#include <algorithm>

#include "core/error.hpp"
#include "core/hierarchy.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

std::vector<oracle::WeightedEdge> edges_of(const hzsl::WeightedDigraph& g) {
  std::vector<oracle::WeightedEdge> out;
  for (const auto& e : g.edges()) out.push_back({e.child, e.parent, e.weight});
  return out;
}

std::vector<std::pair<std::string, std::string>> edges_of(
    const hzsl::LabelHierarchy& h) {
  std::vector<std::pair<std::string, std::string>> out;
  for (hzsl::LabelId v = 0; v < static_cast<hzsl::LabelId>(h.size()); ++v) {
    if (v != h.root()) out.emplace_back(h.label(v), h.label(h.parent(v)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

void expect_matches_oracle(const hzsl::WeightedDigraph& g,
                           const std::string& root) {
  std::vector<std::string> nodes(g.nodes().begin(), g.nodes().end());
  auto want = oracle::brute_force_arborescence(nodes, edges_of(g), root);
  if (!want) {
    try {
      hzsl::max_arborescence(g, root);
      FAIL() << "expected NoArborescence";
    } catch (const hzsl::Error& e) {
      EXPECT_EQ(e.code(), hzsl::ErrorCode::kNoArborescence);
    }
    return;
  }
  auto got = hzsl::max_arborescence(g, root);
  EXPECT_EQ(hzsl::arborescence_weight(g, got), want->weight);
  auto want_edges = want->edges;
  std::sort(want_edges.begin(), want_edges.end());
  EXPECT_EQ(edges_of(got), want_edges);
}

}  // namespace

TEST(MaxArborescence, TreeInputReturnedUnchanged) {
  hzsl::WeightedDigraph g;
  g.add_edge("A", "root");
  g.add_edge("B", "root");
  g.add_edge("C", "A");
  auto h = hzsl::max_arborescence(g, "root");
  EXPECT_EQ(h, *fixtures::tree({{"A", "root"}, {"B", "root"}, {"C", "A"}}));
}

TEST(MaxArborescence, HeavyCycleIsBroken) {
  hzsl::WeightedDigraph g;
  g.add_edge("a", "r", 1.0);
  g.add_edge("b", "r", 1.0);
  g.add_edge("c", "r", 3.0);
  g.add_edge("b", "a", 10.0);
  g.add_edge("c", "b", 10.0);
  g.add_edge("a", "c", 9.0);
  expect_matches_oracle(g, "r");
  auto h = hzsl::max_arborescence(g, "r");
  // Entering at c costs the b->c edge: 3 + 9 + 10 beats 1 + 10 + 10.
  EXPECT_EQ(h.label(h.parent(h.id("c"))), "r");
  EXPECT_EQ(hzsl::arborescence_weight(g, h), 22.0);
}

TEST(MaxArborescence, FourNodeRandomWeights) {
  hzsl::Rng rng(101);
  for (int t = 0; t < 100; ++t) expect_matches_oracle(fixtures::random_digraph(4, 0.7, rng), "a");
}

TEST(MaxArborescence, AllTiesPreferSmallestParentLabel) {
  hzsl::WeightedDigraph g;
  for (const char* v : {"a", "b", "c"}) {
    for (const char* u : {"a", "b", "c"}) {
      if (std::string(u) != v) g.add_edge(v, u, 1.0);
    }
  }
  auto h = hzsl::max_arborescence(g, "a");
  EXPECT_EQ(h.label(h.parent(h.id("b"))), "a");
  EXPECT_EQ(h.label(h.parent(h.id("c"))), "a");
  expect_matches_oracle(g, "a");
}

TEST(MaxArborescence, UnreachableNodesReported) {
  hzsl::WeightedDigraph g;
  g.add_edge("a", "r");
  g.add_node("z");
  try {
    hzsl::max_arborescence(g, "r");
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kNoArborescence);
    EXPECT_EQ(e.subjects(), std::vector<std::string>{"z"});
  }
}

TEST(MaxArborescence, DefaultWeightsAreDeterministic) {
  hzsl::Rng rng(102);
  for (int t = 0; t < 30; ++t) {
    auto g = fixtures::random_digraph(5, 0.5, rng);
    hzsl::WeightedDigraph unit;
    for (const auto& v : g.nodes()) unit.add_node(v);
    for (const auto& e : g.edges()) unit.add_edge(e.child, e.parent);
    expect_matches_oracle(unit, "a");
  }
}

TEST(MaxArborescence, FiveNodeRandomAgainstBruteForce) {
  hzsl::Rng rng(103);
  for (int t = 0; t < 200; ++t) {
    auto g = fixtures::random_digraph(2 + t % 4, 0.6, rng);
    expect_matches_oracle(g, "a");
  }
}

TEST(MaxArborescence, OutputAfterPruning) {
  // WordNet-like toy: two multi-parent nodes.
  hzsl::WeightedDigraph g;
  g.add_edge("animal", "entity");
  g.add_edge("object", "entity");
  g.add_edge("pet", "animal");
  g.add_edge("dog", "pet");
  g.add_edge("dog", "animal");
  g.add_edge("cat", "pet");
  g.add_edge("toy", "object");
  g.add_edge("robot", "toy");
  g.add_edge("robot", "pet");
  auto pruned = hzsl::prune_to_support(g, {"dog", "cat", "robot"});
  auto h = hzsl::max_arborescence(pruned, "entity");
  EXPECT_EQ(h.size(), pruned.nodes().size());
  std::vector<std::string> nodes(pruned.nodes().begin(), pruned.nodes().end());
  auto want = oracle::brute_force_arborescence(nodes, edges_of(pruned), "entity");
  ASSERT_TRUE(want);
  EXPECT_EQ(hzsl::arborescence_weight(pruned, h), want->weight);
}
