#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

namespace oracle {

std::vector<int> parents_of(const hzsl::LabelHierarchy& h) {
  std::vector<int> parent(h.size());
  for (int v = 0; v < static_cast<int>(h.size()); ++v) parent[v] = h.parent(v);
  return parent;
}

std::vector<std::vector<int>> bfs_distances(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<std::vector<int>> adj(n);
  for (int v = 0; v < n; ++v) {
    if (parent[v] >= 0) {
      adj[v].push_back(parent[v]);
      adj[parent[v]].push_back(v);
    }
  }
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::deque<int> q{s};
    dist[s][s] = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (int w : adj[u]) {
        if (dist[s][w] < 0) {
          dist[s][w] = dist[s][u] + 1;
          q.push_back(w);
        }
      }
    }
  }
  return dist;
}

int depth_by_walk(const std::vector<int>& parent, int v) {
  int d = 0;
  while (parent[v] >= 0) {
    v = parent[v];
    ++d;
  }
  return d;
}

bool is_ancestor_by_walk(const std::vector<int>& parent, int a, int v) {
  for (int u = v; u >= 0; u = parent[u]) {
    if (u == a) return true;
  }
  return false;
}

std::vector<double> enumerate_path_distribution(
    const std::vector<int>& parent, const std::vector<double>& per_class,
    double bias) {
  const int n = static_cast<int>(parent.size());
  std::vector<double> energy_of_end(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(n, false);
  for (unsigned long mask = 1; mask < (1UL << n); ++mask) {
    auto on = [&](int v) { return (mask >> v) & 1UL; };
    bool valid = true;
    std::vector<int> active_children(n, 0);
    for (int v = 0; v < n && valid; ++v) {
      if (!on(v)) continue;
      if (parent[v] < 0) continue;
      if (!on(parent[v])) valid = false;
      else ++active_children[parent[v]];
    }
    for (int v = 0; v < n && valid; ++v) {
      if (parent[v] < 0 && !on(v)) valid = false;
      if (active_children[v] > 1) valid = false;
    }
    if (!valid) continue;
    double e = bias;
    int end = -1;
    for (int v = 0; v < n; ++v) {
      if (!on(v)) continue;
      e += per_class[v];
      if (active_children[v] == 0) end = v;
    }
    seen[end] = true;
    energy_of_end[end] = e;
  }
  double lo = std::numeric_limits<double>::infinity();
  for (int v = 0; v < n; ++v) lo = std::min(lo, energy_of_end[v]);
  double z = 0.0;
  std::vector<double> p(n, 0.0);
  for (int v = 0; v < n; ++v) {
    if (!seen[v]) continue;
    p[v] = std::exp(-(energy_of_end[v] - lo));
    z += p[v];
  }
  for (double& x : p) x /= z;
  return p;
}

namespace {

std::vector<double> relu_matvec(const Eigen::MatrixXd& w,
                                const std::vector<double>& x) {
  std::vector<double> out(w.rows(), 0.0);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * x[c];
    out[r] = s > 0.0 ? s : 0.0;
  }
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

}  // namespace

Features straight_line_features(const hzsl::CrfModel& model,
                                const Eigen::VectorXd& h) {
  const auto& p = model.params();
  const auto& attrs = model.attributes().matrix();
  const int n = static_cast<int>(model.hierarchy().size());
  std::vector<double> x(h.data(), h.data() + h.size());
  Features f;
  f.linear.assign(n, 0.0);
  for (int c = 0; c < n; ++c) {
    for (int k = 0; k < h.size(); ++k) f.linear[c] += p.linear(c, k) * x[k];
  }
  auto emb = relu_matvec(p.compat.w2(), relu_matvec(p.compat.w1(), x));
  std::vector<double> raw(n, 0.0);
  for (int c = 0; c < n; ++c) {
    for (std::size_t k = 0; k < emb.size(); ++k) raw[c] += attrs(c, k) * emb[k];
  }
  const double mx = *std::max_element(raw.begin(), raw.end());
  double z = 0.0;
  for (double r : raw) z += std::exp(r - mx);
  f.compat.resize(n);
  for (int c = 0; c < n; ++c) f.compat[c] = raw[c] - mx - std::log(z);

  // ConSE: softmax head, top-m renormalized, convex combination.
  const auto& head = model.head();
  const auto k = head.classes().size();
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = head.bias()(i);
    for (int j = 0; j < h.size(); ++j) s += head.weights()(i, j) * x[j];
    logits[i] = s;
  }
  const double lmax = *std::max_element(logits.begin(), logits.end());
  double lz = 0.0;
  for (double l : logits) lz += std::exp(l - lmax);
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < k; ++i) {
    ranked.push_back({std::exp(logits[i] - lmax) / lz, i});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const int m = model.conse().m;
  double top = 0.0;
  for (int j = 0; j < m; ++j) top += ranked[j].first;
  std::vector<double> eps(attrs.cols(), 0.0);
  for (int j = 0; j < m; ++j) {
    const int cls = head.classes()[ranked[j].second];
    for (Eigen::Index d = 0; d < attrs.cols(); ++d) {
      eps[d] += ranked[j].first / top * attrs(cls, d);
    }
  }
  f.conse.resize(n);
  for (int c = 0; c < n; ++c) {
    std::vector<double> a(attrs.cols());
    for (Eigen::Index d = 0; d < attrs.cols(); ++d) a[d] = attrs(c, d);
    f.conse[c] = cosine(a, eps);
  }
  return f;
}

std::vector<double> per_class_potentials(const hzsl::CrfParameters& p,
                                         const Features& f) {
  std::vector<double> out(f.linear.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = p.w_linear(c) * f.linear[c] + p.w_compat(c) * f.compat[c] +
             p.w_conse(c) * f.conse[c];
  }
  return out;
}

std::optional<Arborescence> brute_force_arborescence(
    const std::vector<std::string>& nodes,
    const std::vector<WeightedEdge>& edges, const std::string& root) {
  std::vector<std::string> others;
  for (const auto& v : nodes) {
    if (v != root) others.push_back(v);
  }
  std::vector<std::vector<const WeightedEdge*>> in(others.size());
  for (std::size_t i = 0; i < others.size(); ++i) {
    for (const auto& e : edges) {
      if (e.child == others[i] && e.parent != e.child) in[i].push_back(&e);
    }
    if (in[i].empty()) return std::nullopt;
  }
  std::optional<Arborescence> best;
  std::vector<std::pair<std::string, std::string>> best_key;
  std::vector<std::size_t> choice(others.size(), 0);
  while (true) {
    std::map<std::string, std::string> par;
    double w = 0.0;
    for (std::size_t i = 0; i < others.size(); ++i) {
      par[others[i]] = in[i][choice[i]]->parent;
      w += in[i][choice[i]]->weight;
    }
    bool acyclic = true;
    for (const auto& v : others) {
      std::string u = v;
      std::size_t steps = 0;
      while (u != root && steps <= nodes.size()) {
        u = par.at(u);
        ++steps;
      }
      if (u != root) {
        acyclic = false;
        break;
      }
    }
    if (acyclic) {
      // Sort key: (parent, child) ascending.
      std::vector<std::pair<std::string, std::string>> key;
      for (const auto& [c, p] : par) key.emplace_back(p, c);
      std::sort(key.begin(), key.end());
      if (!best || w > best->weight || (w == best->weight && key < best_key)) {
        Arborescence a;
        a.weight = w;
        for (const auto& [c, p] : par) a.edges.emplace_back(c, p);
        best = a;
        best_key = key;
      }
    }
    std::size_t i = 0;
    while (i < choice.size() && ++choice[i] == in[i].size()) choice[i++] = 0;
    if (i == choice.size()) break;
  }
  return best;
}

double u_path_length(const std::vector<int>& parent, int pred, int truth,
                     double normalizer) {
  return 1.0 - bfs_distances(parent)[pred][truth] / normalizer;
}

double u_subtree_depth(const std::vector<int>& parent, int pred, int truth) {
  if (!is_ancestor_by_walk(parent, pred, truth)) return 0.0;
  const int dt = depth_by_walk(parent, truth);
  if (dt == 0) return 1.0;
  return static_cast<double>(depth_by_walk(parent, pred)) / dt;
}

int tree_diameter(const std::vector<int>& parent) {
  int best = 0;
  for (const auto& row : bfs_distances(parent)) {
    best = std::max(best, *std::max_element(row.begin(), row.end()));
  }
  return best;
}

int brute_force_max_eu(const std::vector<double>& prob,
                       const std::function<double(int, int)>& utility,
                       double* best_value) {
  const int n = static_cast<int>(prob.size());
  int best = -1;
  double best_eu = -std::numeric_limits<double>::infinity();
  for (int v = 0; v < n; ++v) {
    double eu = 0.0;
    for (int t = 0; t < n; ++t) eu += prob[t] * utility(v, t);
    if (eu > best_eu) {
      best_eu = eu;
      best = v;
    }
  }
  if (best_value) *best_value = best_eu;
  return best;
}

double central_difference(const std::function<double()>& f, double* x,
                          double step) {
  const double saved = *x;
  *x = saved + step;
  const double up = f();
  *x = saved - step;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * step);
}

double nearest_centroid_accuracy(const std::vector<hzsl::Instance>& train,
                                 const std::vector<hzsl::Instance>& test) {
  std::map<int, std::pair<Eigen::VectorXd, int>> sums;
  for (const auto& x : train) {
    auto& [s, n] = sums[x.label];
    if (n == 0) s = Eigen::VectorXd::Zero(x.features.size());
    s += x.features;
    ++n;
  }
  int correct = 0;
  for (const auto& x : test) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [label, sn] : sums) {
      const double d = (x.features - sn.first / sn.second).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = label;
      }
    }
    if (best == x.label) ++correct;
  }
  return test.empty() ? 0.0 : static_cast<double>(correct) / test.size();
}

}  // namespace oracle
