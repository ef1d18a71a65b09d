#include "core/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"

namespace hzsl {

// ---------------------------------------------------------------------------
// SymbolTable

SymbolTable::SymbolTable(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i > 0 && labels_[i] == labels_[i - 1]) {
      fail(ErrorCode::kInvalidArgument, "duplicate label '" + labels_[i] + "'",
           {labels_[i]});
    }
    index_.emplace(labels_[i], static_cast<LabelId>(i));
  }
}

const std::string& SymbolTable::label(LabelId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= labels_.size()) {
    fail(ErrorCode::kUnknownLabel, "label id " + std::to_string(id) +
                                       " out of range");
  }
  return labels_[id];
}

std::optional<LabelId> SymbolTable::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

LabelId SymbolTable::id(std::string_view label) const {
  auto found = find(label);
  if (!found) {
    fail(ErrorCode::kUnknownLabel, "unknown label '" + std::string(label) + "'",
         {std::string(label)});
  }
  return *found;
}

// ---------------------------------------------------------------------------
// LabelHierarchy

LabelHierarchy LabelHierarchy::build_from_edges(
    std::span<const LabelEdge> edges) {
  if (edges.empty()) fail(ErrorCode::kInvalidArgument, "empty edge list");

  std::map<std::string, std::string> parent_of;
  std::set<std::string> labels;
  for (const auto& [child, parent] : edges) {
    labels.insert(child);
    labels.insert(parent);
    if (child == parent) {
      fail(ErrorCode::kCycleDetected, "self-loop on '" + child + "'", {child});
    }
    auto [it, inserted] = parent_of.emplace(child, parent);
    if (!inserted && it->second != parent) {
      fail(ErrorCode::kMultipleParents,
           "node '" + child + "' has parents '" + it->second + "' and '" +
               parent + "'",
           {child});
    }
  }

  SymbolTable symbols({labels.begin(), labels.end()});
  std::vector<LabelId> parent(symbols.size(), kNoLabel);
  for (const auto& [child, p] : parent_of) {
    parent[symbols.id(child)] = symbols.id(p);
  }
  return from_parents(std::move(symbols), std::move(parent));
}

LabelHierarchy LabelHierarchy::from_parents(SymbolTable symbols,
                                            std::vector<LabelId> parent) {
  const auto n = static_cast<LabelId>(parent.size());
  if (n == 0 || symbols.size() != parent.size()) {
    fail(ErrorCode::kInvalidArgument, "hierarchy needs one label per node");
  }
  for (LabelId p : parent) {
    if (p != kNoLabel && (p < 0 || p >= n)) {
      fail(ErrorCode::kInvalidArgument, "parent id out of range");
    }
  }

  // Cycle check: walk parent chains, colouring nodes on the current walk.
  std::vector<int> state(n, 0);  // 0 new, 1 on walk, 2 done
  for (LabelId start = 0; start < n; ++start) {
    std::vector<LabelId> walk;
    LabelId x = start;
    while (x != kNoLabel && state[x] == 0) {
      state[x] = 1;
      walk.push_back(x);
      x = parent[x];
    }
    if (x != kNoLabel && state[x] == 1) {
      std::vector<std::string> witness;
      LabelId y = x;
      do {
        witness.push_back(symbols.label(y));
        y = parent[y];
      } while (y != x);
      std::sort(witness.begin(), witness.end());
      std::string msg = "cycle through";
      for (const auto& w : witness) msg += " '" + w + "'";
      fail(ErrorCode::kCycleDetected, msg, std::move(witness));
    }
    for (LabelId w : walk) state[w] = 2;
  }

  std::vector<std::string> roots;
  LabelId root = kNoLabel;
  for (LabelId v = 0; v < n; ++v) {
    if (parent[v] == kNoLabel) {
      roots.push_back(symbols.label(v));
      root = v;
    }
  }
  if (roots.size() != 1) {
    std::string msg = "expected one root, found";
    for (const auto& r : roots) msg += " '" + r + "'";
    fail(ErrorCode::kMultipleRoots, msg, std::move(roots));
  }

  LabelHierarchy h;
  h.symbols_ = std::move(symbols);
  h.parent_ = std::move(parent);
  h.root_ = root;
  h.index();
  if (h.order_.size() != h.size()) {
    // Unreachable without a cycle, which was rejected above.
    fail(ErrorCode::kDisconnected, "hierarchy is not connected");
  }
  return h;
}

void LabelHierarchy::index() {
  const std::size_t n = parent_.size();
  children_.assign(n, {});
  for (LabelId v = 0; v < static_cast<LabelId>(n); ++v) {
    if (parent_[v] != kNoLabel) children_[parent_[v]].push_back(v);
  }

  depth_.assign(n, 0);
  order_.clear();
  order_.reserve(n);
  order_.push_back(root_);
  for (std::size_t i = 0; i < order_.size(); ++i) {
    LabelId v = order_[i];
    for (LabelId c : children_[v]) {
      depth_[c] = depth_[v] + 1;
      order_.push_back(c);
    }
  }
  max_depth_ = *std::max_element(depth_.begin(), depth_.end());

  path_offset_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    path_offset_[v + 1] = path_offset_[v] + depth_[v] + 1;
  }
  path_storage_.assign(path_offset_[n], kNoLabel);
  for (LabelId v = 0; v < static_cast<LabelId>(n); ++v) {
    LabelId x = v;
    for (int k = depth_[v]; k >= 0; --k) {
      path_storage_[path_offset_[v] + k] = x;
      x = parent_[x];
    }
  }

  // Pre-order enter/exit stamps for O(1) ancestor tests.
  enter_.assign(n, 0);
  exit_.assign(n, 0);
  int clock = 0;
  std::vector<std::pair<LabelId, std::size_t>> stack{{root_, 0}};
  enter_[root_] = clock++;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < children_[v].size()) {
      LabelId c = children_[v][next++];
      enter_[c] = clock++;
      stack.emplace_back(c, 0);
    } else {
      exit_[v] = clock - 1;
      stack.pop_back();
    }
  }

  // Two-pass farthest-node search.
  auto farthest = [&](LabelId from) {
    std::vector<int> dist(n, -1);
    std::deque<LabelId> queue{from};
    dist[from] = 0;
    LabelId best = from;
    while (!queue.empty()) {
      LabelId v = queue.front();
      queue.pop_front();
      if (dist[v] > dist[best] || (dist[v] == dist[best] && v < best)) {
        best = v;
      }
      auto visit = [&](LabelId u) {
        if (u != kNoLabel && dist[u] < 0) {
          dist[u] = dist[v] + 1;
          queue.push_back(u);
        }
      };
      visit(parent_[v]);
      for (LabelId c : children_[v]) visit(c);
    }
    return std::pair{best, dist[best]};
  };
  auto [end_a, unused] = farthest(root_);
  (void)unused;
  diameter_ = farthest(end_a).second;
}

std::vector<LabelId> LabelHierarchy::leaves() const {
  std::vector<LabelId> out;
  for (LabelId v = 0; v < static_cast<LabelId>(size()); ++v) {
    if (children_[v].empty()) out.push_back(v);
  }
  return out;
}

std::span<const LabelId> LabelHierarchy::path(LabelId v) const {
  if (!contains(v)) fail(ErrorCode::kUnknownLabel, "node id out of range");
  return {path_storage_.data() + path_offset_[v],
          static_cast<std::size_t>(depth_[v] + 1)};
}

std::vector<std::vector<LabelId>> LabelHierarchy::enumerate_paths() const {
  std::vector<std::vector<LabelId>> out;
  out.reserve(size());
  for (LabelId v = 0; v < static_cast<LabelId>(size()); ++v) {
    auto p = path(v);
    out.emplace_back(p.begin(), p.end());
  }
  return out;
}

LabelId LabelHierarchy::ancestor(LabelId y, int level) const {
  if (!contains(y)) fail(ErrorCode::kUnknownLabel, "node id out of range");
  if (level < 0 || level > depth_[y]) {
    fail(ErrorCode::kLevelBelowNode,
         "level " + std::to_string(level) + " is below node '" + label(y) +
             "' at depth " + std::to_string(depth_[y]),
         {label(y)});
  }
  return path_storage_[path_offset_[y] + level];
}

bool LabelHierarchy::is_ancestor_or_self(LabelId a, LabelId y) const {
  if (!contains(a) || !contains(y)) {
    fail(ErrorCode::kUnknownLabel, "node id out of range");
  }
  return enter_[a] <= enter_[y] && enter_[y] <= exit_[a];
}

LabelId LabelHierarchy::lca(LabelId a, LabelId b) const {
  auto pa = path(a);
  auto pb = path(b);
  std::size_t k = 0;
  const std::size_t limit = std::min(pa.size(), pb.size());
  while (k + 1 < limit && pa[k + 1] == pb[k + 1]) ++k;
  return pa[k];
}

int LabelHierarchy::tree_distance(LabelId a, LabelId b) const {
  return depth(a) + depth(b) - 2 * depth(lca(a, b));
}

std::vector<LabelId> LabelHierarchy::nodes_at_level(int level) const {
  std::vector<LabelId> out;
  for (LabelId v = 0; v < static_cast<LabelId>(size()); ++v) {
    if (depth_[v] == level) out.push_back(v);
  }
  return out;
}

std::vector<LabelId> LabelHierarchy::subtree(LabelId y) const {
  if (!contains(y)) fail(ErrorCode::kUnknownLabel, "node id out of range");
  std::vector<LabelId> out;
  for (LabelId v = 0; v < static_cast<LabelId>(size()); ++v) {
    if (enter_[y] <= enter_[v] && enter_[v] <= exit_[y]) out.push_back(v);
  }
  return out;
}

std::vector<LabelEdge> LabelHierarchy::canonical_edges() const {
  std::vector<LabelEdge> out;
  out.reserve(size() - 1);
  for (LabelId v : order_) {
    if (v != root_) out.emplace_back(label(v), label(parent_[v]));
  }
  return out;
}

std::uint64_t LabelHierarchy::fingerprint() const {
  std::string canon = "root\t" + label(root_) + "\n";
  for (const auto& [child, parent] : canonical_edges()) {
    canon += child + "\t" + parent + "\n";
  }
  return text::fnv1a(canon);
}

// ---------------------------------------------------------------------------
// WeightedDigraph

void WeightedDigraph::add_node(const std::string& label) {
  nodes_.insert(label);
}

void WeightedDigraph::add_edge(const std::string& child,
                               const std::string& parent, double weight) {
  if (child == parent) {
    fail(ErrorCode::kInvalidArgument, "self-loop on '" + child + "'", {child});
  }
  if (!std::isfinite(weight)) {
    fail(ErrorCode::kInvalidArgument, "non-finite edge weight");
  }
  nodes_.insert(child);
  nodes_.insert(parent);
  auto [it, inserted] = weights_.emplace(std::pair{child, parent}, weight);
  if (!inserted) it->second = std::max(it->second, weight);
}

void WeightedDigraph::remove_node(const std::string& label) {
  nodes_.erase(label);
  std::erase_if(weights_, [&](const auto& kv) {
    return kv.first.first == label || kv.first.second == label;
  });
}

std::vector<WeightedDigraph::Edge> WeightedDigraph::edges() const {
  std::vector<Edge> out;
  out.reserve(weights_.size());
  for (const auto& [key, w] : weights_) out.push_back({key.first, key.second, w});
  return out;
}

std::optional<double> WeightedDigraph::weight(const std::string& child,
                                              const std::string& parent) const {
  auto it = weights_.find({child, parent});
  if (it == weights_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> WeightedDigraph::leaves() const {
  std::set<std::string> has_child;
  for (const auto& [key, w] : weights_) has_child.insert(key.second);
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (!has_child.count(n)) out.push_back(n);
  }
  return out;
}

WeightedDigraph prune_to_support(const WeightedDigraph& g,
                                 const std::set<std::string>& keep) {
  std::vector<std::string> unknown;
  for (const auto& k : keep) {
    if (!g.has_node(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    fail(ErrorCode::kUnknownKeepLabel,
         "keep label '" + unknown.front() + "' is not in the graph", unknown);
  }

  std::map<std::string, int> incoming;
  std::map<std::string, std::vector<std::string>> parents_of;
  for (const auto& n : g.nodes()) incoming[n] = 0;
  for (const auto& e : g.edges()) {
    ++incoming[e.parent];
    parents_of[e.child].push_back(e.parent);
  }

  std::set<std::string> removed;
  std::deque<std::string> queue;
  for (const auto& [n, count] : incoming) {
    if (count == 0 && !keep.count(n)) queue.push_back(n);
  }
  while (!queue.empty()) {
    std::string n = std::move(queue.front());
    queue.pop_front();
    if (!removed.insert(n).second) continue;
    for (const auto& p : parents_of[n]) {
      if (--incoming[p] == 0 && !keep.count(p)) queue.push_back(p);
    }
  }

  WeightedDigraph out;
  for (const auto& n : g.nodes()) {
    if (!removed.count(n)) out.add_node(n);
  }
  for (const auto& e : g.edges()) {
    if (!removed.count(e.child) && !removed.count(e.parent)) {
      out.add_edge(e.child, e.parent, e.weight);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chu-Liu/Edmonds

namespace {

struct ArcEdge {
  int from;  // parent
  int to;    // child
  double weight;
  int id;
};

// Returns, per node, the id of its chosen incoming edge (-1 for root), or
// nullopt if no spanning arborescence exists.
std::optional<std::vector<int>> edmonds(int n, int root,
                                        const std::vector<ArcEdge>& edges) {
  std::vector<int> best(n, -1);
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    const auto& e = edges[i];
    if (e.to == root || e.from == e.to) continue;
    if (best[e.to] < 0 || e.weight > edges[best[e.to]].weight) best[e.to] = i;
  }
  for (int v = 0; v < n; ++v) {
    if (v != root && best[v] < 0) return std::nullopt;
  }

  std::vector<int> comp(n, -1);
  std::vector<int> visited_by(n, -1);
  std::vector<bool> on_cycle(n, false);
  int comps = 0;
  for (int v = 0; v < n; ++v) {
    int x = v;
    while (x != root && visited_by[x] < 0 && comp[x] < 0) {
      visited_by[x] = v;
      x = edges[best[x]].from;
    }
    if (x != root && visited_by[x] == v && comp[x] < 0) {
      int y = x;
      do {
        comp[y] = comps;
        on_cycle[y] = true;
        y = edges[best[y]].from;
      } while (y != x);
      ++comps;
    }
  }

  if (comps == 0) {
    std::vector<int> chosen(n, -1);
    for (int v = 0; v < n; ++v) {
      if (v != root) chosen[v] = edges[best[v]].id;
    }
    return chosen;
  }

  for (int v = 0; v < n; ++v) {
    if (comp[v] < 0) comp[v] = comps++;
  }
  std::vector<ArcEdge> contracted;
  contracted.reserve(edges.size());
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    const auto& e = edges[i];
    if (e.to == root) continue;
    const int cu = comp[e.from];
    const int cv = comp[e.to];
    if (cu == cv) continue;
    double w = e.weight;
    if (on_cycle[e.to]) w -= edges[best[e.to]].weight;
    contracted.push_back({cu, cv, w, i});
  }

  auto sub = edmonds(comps, comp[root], contracted);
  if (!sub) return std::nullopt;

  std::vector<int> local(n, -1);  // index into `edges`
  for (int c = 0; c < comps; ++c) {
    if (c == comp[root]) continue;
    const int idx = (*sub)[c];
    local[edges[idx].to] = idx;
  }
  std::vector<int> chosen(n, -1);
  for (int v = 0; v < n; ++v) {
    if (v == root) continue;
    if (local[v] < 0) local[v] = best[v];
    chosen[v] = edges[local[v]].id;
  }
  return chosen;
}

double total_weight(const std::vector<int>& chosen,
                    const std::vector<ArcEdge>& all) {
  double sum = 0.0;
  for (int id : chosen) {
    if (id >= 0) sum += all[id].weight;
  }
  return sum;
}

}  // namespace

LabelHierarchy max_arborescence(const WeightedDigraph& g,
                                const std::string& root) {
  if (!g.has_node(root)) {
    fail(ErrorCode::kUnknownLabel, "root '" + root + "' is not in the graph",
         {root});
  }
  SymbolTable symbols({g.nodes().begin(), g.nodes().end()});
  const int n = static_cast<int>(symbols.size());
  const int root_id = symbols.id(root);

  // Preference order: ascending (parent label, child label).
  std::vector<ArcEdge> arcs;
  for (const auto& e : g.edges()) {
    const int to = symbols.id(e.child);
    if (to == root_id) continue;
    arcs.push_back({symbols.id(e.parent), to, e.weight, 0});
  }
  std::sort(arcs.begin(), arcs.end(), [](const ArcEdge& a, const ArcEdge& b) {
    return std::pair{a.from, a.to} < std::pair{b.from, b.to};
  });
  for (int i = 0; i < static_cast<int>(arcs.size()); ++i) arcs[i].id = i;

  {
    std::vector<std::vector<int>> kids(n);
    for (const auto& a : arcs) kids[a.from].push_back(a.to);
    std::vector<bool> seen(n, false);
    std::vector<int> stack{root_id};
    seen[root_id] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int c : kids[v]) {
        if (!seen[c]) {
          seen[c] = true;
          stack.push_back(c);
        }
      }
    }
    std::vector<std::string> unreachable;
    for (int v = 0; v < n; ++v) {
      if (!seen[v]) unreachable.push_back(symbols.label(v));
    }
    if (!unreachable.empty()) {
      fail(ErrorCode::kNoArborescence,
           std::to_string(unreachable.size()) +
               " node(s) unreachable from root '" + root + "'",
           std::move(unreachable));
    }
  }

  auto optimum = edmonds(n, root_id, arcs);
  const double best_weight = total_weight(*optimum, arcs);
  const double tol = 1e-9 * std::max(1.0, std::abs(best_weight));

  // Tie-breaking: walk edges in preference order and pin each one whose
  // pinning keeps the optimum weight.
  std::vector<int> pinned(n, -1);
  std::vector<int> in_degree(n, 0);
  for (const auto& a : arcs) ++in_degree[a.to];
  std::vector<bool> active(arcs.size(), true);
  for (const auto& a : arcs) {
    if (pinned[a.to] >= 0) continue;
    if (in_degree[a.to] == 1) {
      pinned[a.to] = a.id;
      continue;
    }
    std::vector<ArcEdge> trial;
    trial.reserve(arcs.size());
    for (const auto& b : arcs) {
      if (!active[b.id]) continue;
      if (b.to == a.to && b.id != a.id) continue;
      trial.push_back(b);
    }
    auto result = edmonds(n, root_id, trial);
    if (result && std::abs(total_weight(*result, arcs) - best_weight) <= tol) {
      pinned[a.to] = a.id;
      for (const auto& b : arcs) {
        if (b.to == a.to && b.id != a.id) active[b.id] = false;
      }
      in_degree[a.to] = 1;
    } else {
      active[a.id] = false;
      --in_degree[a.to];
    }
  }

  std::vector<LabelId> parent(n, kNoLabel);
  for (int v = 0; v < n; ++v) {
    if (v == root_id) continue;
    if (pinned[v] < 0) {
      // Last surviving in-edge.
      for (const auto& a : arcs) {
        if (a.to == v && active[a.id]) {
          pinned[v] = a.id;
          break;
        }
      }
    }
    parent[v] = arcs[pinned[v]].from;
  }
  return LabelHierarchy::from_parents(std::move(symbols), std::move(parent));
}

double arborescence_weight(const WeightedDigraph& g, const LabelHierarchy& h) {
  double sum = 0.0;
  for (LabelId v = 0; v < static_cast<LabelId>(h.size()); ++v) {
    if (v == h.root()) continue;
    auto w = g.weight(h.label(v), h.label(h.parent(v)));
    if (!w) {
      fail(ErrorCode::kInvalidArgument, "edge '" + h.label(v) + "' -> '" +
                                            h.label(h.parent(v)) +
                                            "' is not in the graph");
    }
    sum += *w;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Files

namespace {

template <typename OnEdge>
void parse_edge_lines(std::istream& in, const std::string& name,
                      OnEdge on_edge) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 &&
        text::check_format_line(line, "hierarchy", text::where(name, line_no))) {
      continue;
    }
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto fields = text::split(line, '\t');
    if (fields.size() != 2 && fields.size() != 3) {
      fail(ErrorCode::kParse, text::where(name, line_no) +
                                  ": expected child<TAB>parent[<TAB>weight]");
    }
    if (fields[0].empty() || fields[1].empty()) {
      fail(ErrorCode::kParse, text::where(name, line_no) + ": empty label");
    }
    double weight = 1.0;
    if (fields.size() == 3) {
      auto w = text::parse_double(text::trim(fields[2]));
      if (!w || !std::isfinite(*w)) {
        fail(ErrorCode::kParse,
             text::where(name, line_no) + ": bad weight '" +
                 std::string(fields[2]) + "'");
      }
      weight = *w;
    }
    on_edge(std::string(fields[0]), std::string(fields[1]), weight, line_no);
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

}  // namespace

WeightedDigraph read_digraph(std::istream& in, const std::string& name) {
  WeightedDigraph g;
  parse_edge_lines(in, name, [&](std::string child, std::string parent,
                                 double w, std::size_t line_no) {
    if (child == parent) {
      fail(ErrorCode::kParse, text::where(name, line_no) + ": self-loop");
    }
    g.add_edge(child, parent, w);
  });
  return g;
}

WeightedDigraph load_digraph(const std::string& path) {
  auto in = open_input(path);
  return read_digraph(in, path);
}

std::vector<LabelEdge> read_edges(std::istream& in, const std::string& name) {
  std::vector<LabelEdge> edges;
  parse_edge_lines(in, name,
                   [&](std::string child, std::string parent, double,
                       std::size_t) {
                     edges.emplace_back(std::move(child), std::move(parent));
                   });
  return edges;
}

LabelHierarchy load_hierarchy(const std::string& path) {
  auto in = open_input(path);
  auto edges = read_edges(in, path);
  if (edges.empty()) fail(ErrorCode::kParse, path + ": no edges");
  return LabelHierarchy::build_from_edges(edges);
}

void write_hierarchy(std::ostream& out, const LabelHierarchy& h) {
  text::write_format_line(out, "hierarchy");
  for (const auto& [child, parent] : h.canonical_edges()) {
    out << child << '\t' << parent << '\n';
  }
}

void save_hierarchy(const std::string& path, const LabelHierarchy& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  write_hierarchy(out, h);
}

std::set<std::string> load_label_set(const std::string& path) {
  auto in = open_input(path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace(t);
  }
  return out;
}

}  // namespace hzsl
