#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "core/crf.hpp"
#include "core/dataio.hpp"
#include "core/hierarchy.hpp"
#include "core/random.hpp"

namespace fixtures {

// Random tree with labels "n00", "n01", ...; node i > 0 hangs under a
// uniformly chosen earlier node.
std::shared_ptr<const hzsl::LabelHierarchy> random_tree(int n, hzsl::Rng& rng);

// Hand-built tree from (child, parent) pairs.
std::shared_ptr<const hzsl::LabelHierarchy> tree(
    std::vector<std::pair<std::string, std::string>> edges);

// CRF with random parameters, random attributes and a random head over the
// leaves. Feature dimension 5.
std::unique_ptr<hzsl::CrfModel> random_crf(
    std::shared_ptr<const hzsl::LabelHierarchy> h, hzsl::Rng& rng,
    double scale = 1.0);

// Random digraph on nodes "a", "b", ... with small integer weights (ties are
// common). Self-loops never occur.
hzsl::WeightedDigraph random_digraph(int n, double edge_prob, hzsl::Rng& rng);

// Small synthetic dataset (depth 2, branching 3) for fast pipeline tests.
hzsl::SynthConfig small_synth(std::uint64_t seed = 11);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace fixtures
