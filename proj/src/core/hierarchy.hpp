#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hzsl {

using LabelId = std::int32_t;
inline constexpr LabelId kNoLabel = -1;

// Bidirectional label <-> dense id map. Ids follow sorted label order.
class SymbolTable {
 public:
  SymbolTable() = default;
  // `labels` must be unique; they are sorted before ids are assigned.
  explicit SymbolTable(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(LabelId id) const;
  std::optional<LabelId> find(std::string_view label) const;
  // Throws kUnknownLabel.
  LabelId id(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelId> index_;
};

// (child, parent) "is-a" edge.
using LabelEdge = std::pair<std::string, std::string>;

// Immutable rooted tree over dense label ids.
class LabelHierarchy {
 public:
  // Throws kMultipleParents, kCycleDetected, kMultipleRoots or
  // kInvalidArgument (empty edge list).
  static LabelHierarchy build_from_edges(std::span<const LabelEdge> edges);
  // parent[root] == kNoLabel. Validated like build_from_edges.
  static LabelHierarchy from_parents(SymbolTable symbols,
                                     std::vector<LabelId> parent);

  std::size_t size() const { return parent_.size(); }
  LabelId root() const { return root_; }
  const SymbolTable& symbols() const { return symbols_; }
  const std::string& label(LabelId v) const { return symbols_.label(v); }
  LabelId id(std::string_view label) const { return symbols_.id(label); }
  bool contains(LabelId v) const {
    return v >= 0 && static_cast<std::size_t>(v) < size();
  }

  LabelId parent(LabelId v) const { return parent_.at(v); }
  const std::vector<LabelId>& children(LabelId v) const {
    return children_.at(v);
  }
  int depth(LabelId v) const { return depth_.at(v); }
  int max_depth() const { return max_depth_; }
  bool is_leaf(LabelId v) const { return children_.at(v).empty(); }
  std::vector<LabelId> leaves() const;

  // Root-to-v path, length depth(v) + 1.
  std::span<const LabelId> path(LabelId v) const;
  // One path per node, ordered by ending node id.
  std::vector<std::vector<LabelId>> enumerate_paths() const;

  // Node order with every parent before its children (BFS, children by id).
  const std::vector<LabelId>& topological_order() const { return order_; }

  // Throws kLevelBelowNode if level > depth(y).
  LabelId ancestor(LabelId y, int level) const;
  bool is_ancestor_or_self(LabelId a, LabelId y) const;
  LabelId lca(LabelId a, LabelId b) const;
  int tree_distance(LabelId a, LabelId b) const;
  int diameter() const { return diameter_; }

  std::vector<LabelId> nodes_at_level(int level) const;
  // y and all descendants, ascending ids.
  std::vector<LabelId> subtree(LabelId y) const;

  // (child, parent) pairs in topological order.
  std::vector<LabelEdge> canonical_edges() const;
  // FNV-1a of the serialized canonical edge list.
  std::uint64_t fingerprint() const;

  friend bool operator==(const LabelHierarchy& a, const LabelHierarchy& b) {
    return a.symbols_.labels() == b.symbols_.labels() &&
           a.parent_ == b.parent_;
  }

 private:
  LabelHierarchy() = default;
  void index();

  SymbolTable symbols_;
  LabelId root_ = kNoLabel;
  std::vector<LabelId> parent_;
  std::vector<std::vector<LabelId>> children_;
  std::vector<int> depth_;
  std::vector<LabelId> path_storage_;
  std::vector<std::size_t> path_offset_;
  std::vector<LabelId> order_;
  std::vector<int> enter_;
  std::vector<int> exit_;
  int max_depth_ = 0;
  int diameter_ = 0;
};

// Directed "is-a" graph with edges stored child -> parent.
class WeightedDigraph {
 public:
  struct Edge {
    std::string child;
    std::string parent;
    double weight = 1.0;
  };

  void add_node(const std::string& label);
  // Self-loops are rejected (kInvalidArgument); parallel edges keep the
  // larger weight.
  void add_edge(const std::string& child, const std::string& parent,
                double weight = 1.0);
  void remove_node(const std::string& label);

  bool has_node(const std::string& label) const {
    return nodes_.count(label) > 0;
  }
  const std::set<std::string>& nodes() const { return nodes_; }
  std::vector<Edge> edges() const;
  std::size_t edge_count() const { return weights_.size(); }
  std::optional<double> weight(const std::string& child,
                               const std::string& parent) const;
  // Nodes with no incoming child edge.
  std::vector<std::string> leaves() const;

  friend bool operator==(const WeightedDigraph&,
                         const WeightedDigraph&) = default;

 private:
  std::set<std::string> nodes_;
  std::map<std::pair<std::string, std::string>, double> weights_;
};

// Repeatedly removes leaves that are not in `keep` until none remain.
// Throws kUnknownKeepLabel.
WeightedDigraph prune_to_support(const WeightedDigraph& g,
                                 const std::set<std::string>& keep);

// Maximum-weight spanning arborescence (Chu-Liu/Edmonds). Among optimal
// trees, prefers edges in ascending (parent label, child label) order.
// Throws kNoArborescence with the unreachable nodes as subjects.
LabelHierarchy max_arborescence(const WeightedDigraph& g,
                                const std::string& root);

// Sum of g's weights over the parent edges of h. Throws kInvalidArgument if
// h uses an edge g does not have.
double arborescence_weight(const WeightedDigraph& g, const LabelHierarchy& h);

// Edge-list files: "child<TAB>parent[<TAB>weight]", '#' comments.
WeightedDigraph read_digraph(std::istream& in, const std::string& name);
WeightedDigraph load_digraph(const std::string& path);
std::vector<LabelEdge> read_edges(std::istream& in, const std::string& name);
LabelHierarchy load_hierarchy(const std::string& path);
void write_hierarchy(std::ostream& out, const LabelHierarchy& h);
void save_hierarchy(const std::string& path, const LabelHierarchy& h);
// One label per line, '#' comments.
std::set<std::string> load_label_set(const std::string& path);

}  // namespace hzsl
