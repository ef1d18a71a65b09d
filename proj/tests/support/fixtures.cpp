#include "support/fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fixtures {

namespace {

std::string node_name(int i) {
  std::string s = std::to_string(i);
  return "n" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

}  // namespace

std::shared_ptr<const hzsl::LabelHierarchy> random_tree(int n, hzsl::Rng& rng) {
  std::vector<hzsl::LabelEdge> edges;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    edges.emplace_back(node_name(i), node_name(pick(rng)));
  }
  if (edges.empty()) edges.emplace_back(node_name(1), node_name(0));
  return std::make_shared<const hzsl::LabelHierarchy>(
      hzsl::LabelHierarchy::build_from_edges(edges));
}

std::shared_ptr<const hzsl::LabelHierarchy> tree(
    std::vector<std::pair<std::string, std::string>> edges) {
  return std::make_shared<const hzsl::LabelHierarchy>(
      hzsl::LabelHierarchy::build_from_edges(edges));
}

std::unique_ptr<hzsl::CrfModel> random_crf(
    std::shared_ptr<const hzsl::LabelHierarchy> h, hzsl::Rng& rng,
    double scale) {
  constexpr int kFeature = 5, kHidden = 6, kEmbed = 4;
  const auto n = static_cast<Eigen::Index>(h->size());
  Eigen::MatrixXd a(n, kEmbed);
  for (Eigen::Index r = 0; r < n; ++r) {
    a.row(r) = hzsl::normal_vector(kEmbed, 1.0, rng).transpose();
  }
  auto attrs = std::make_shared<const hzsl::AttributeTable>(h->symbols(), a);
  auto leaves = h->leaves();
  hzsl::SoftmaxHead head(leaves,
                         hzsl::uniform_matrix(leaves.size(), kFeature, 1.0, rng),
                         hzsl::normal_vector(leaves.size(), 0.5, rng));
  hzsl::CrfParameters p;
  p.w_linear = hzsl::normal_vector(n, scale, rng);
  p.w_compat = hzsl::normal_vector(n, scale, rng);
  p.w_conse = hzsl::normal_vector(n, scale, rng);
  p.bias = hzsl::normal_vector(1, scale, rng)(0);
  p.linear = hzsl::uniform_matrix(n, kFeature, scale, rng);
  p.compat = hzsl::CompatModel(hzsl::uniform_matrix(kHidden, kFeature, 1.0, rng),
                               hzsl::uniform_matrix(kEmbed, kHidden, 1.0, rng));
  const int m = std::min<int>(2, static_cast<int>(leaves.size()));
  return std::make_unique<hzsl::CrfModel>(h, attrs, std::move(head),
                                          hzsl::ConseConfig{m}, std::move(p));
}

hzsl::WeightedDigraph random_digraph(int n, double edge_prob, hzsl::Rng& rng) {
  hzsl::WeightedDigraph g;
  std::bernoulli_distribution coin(edge_prob);
  std::uniform_int_distribution<int> weight(1, 4);
  for (int i = 0; i < n; ++i) g.add_node(std::string(1, static_cast<char>('a' + i)));
  for (int c = 0; c < n; ++c) {
    for (int p = 0; p < n; ++p) {
      if (c == p || !coin(rng)) continue;
      g.add_edge(std::string(1, static_cast<char>('a' + c)),
                 std::string(1, static_cast<char>('a' + p)), weight(rng));
    }
  }
  return g;
}

hzsl::SynthConfig small_synth(std::uint64_t seed) {
  hzsl::SynthConfig c;
  c.depth = 2;
  c.branching = 3;
  c.feature_dim = 8;
  c.embed_dim = 6;
  c.instances_per_leaf = 12;
  c.zeroshot_fraction = 2.0 / 9.0;
  c.novel_fraction = 1.0 / 9.0;
  c.seed = seed;
  return c;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("hzsl_test_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace fixtures
