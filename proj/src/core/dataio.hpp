#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core/attributes.hpp"
#include "core/hierarchy.hpp"
#include "core/zsl_base.hpp"

namespace hzsl {

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitTrainClasses = "train-classes";
inline constexpr const char* kSplitZeroShot = "zeroshot-leaves";
inline constexpr const char* kSplitNovel = "novel";

struct Dataset {
  std::shared_ptr<const LabelHierarchy> hierarchy;
  std::shared_ptr<const AttributeTable> attributes;
  std::vector<Instance> train;
  // Test splits by name, instances in file order.
  std::map<std::string, std::vector<Instance>> tests;
  std::vector<LabelId> train_classes;     // labels seen in `train`, ascending
  std::vector<LabelId> zeroshot_classes;  // leaves outside train_classes
  int feature_dim = 0;

  const std::vector<Instance>& split(const std::string& name) const;

  friend bool operator==(const Dataset& a, const Dataset& b);
};

struct DatasetPaths {
  std::string hierarchy;
  std::string embeddings;
  std::string features;
  std::string splits;

  // hierarchy.tsv, embeddings.txt, features.tsv, splits.tsv inside `dir`.
  static DatasetPaths in_dir(const std::string& dir);
};

// Validates every cross-file invariant. Throws kParse (with file:line),
// kCrossFileInconsistency, kMissingLabel, kEmptyDataset.
Dataset load_dataset(const DatasetPaths& paths);
// Derives train/zero-shot class sets and checks split invariants.
Dataset assemble_dataset(std::shared_ptr<const LabelHierarchy> hierarchy,
                         std::shared_ptr<const AttributeTable> attributes,
                         std::vector<Instance> train,
                         std::map<std::string, std::vector<Instance>> tests);

// Features file: "id<TAB>label<TAB>v1 ... vd".
void write_features(std::ostream& out, const Dataset& ds);
// Splits file: "id<TAB>split".
void write_splits(std::ostream& out, const Dataset& ds);
void save_dataset(const DatasetPaths& paths, const Dataset& ds);

// ---------------------------------------------------------------------------
// Synthetic benchmark generator.

struct SynthConfig {
  int depth = 3;
  int branching = 4;
  int feature_dim = 32;
  int embed_dim = 16;
  int instances_per_leaf = 50;
  double test_fraction = 0.2;      // per training leaf, held out
  double zeroshot_fraction = 0.25; // of the leaves
  double novel_fraction = 0.125;   // novel classes per leaf
  double separation = 5.0;         // sibling-leaf mean distance / noise sd
  double attribute_noise = 0.1;
  std::uint64_t seed = 7;
};

void validate(const SynthConfig& config);  // throws kConfigInvalid

// Complete b-ary tree. Leaf prototypes are random walks down the tree with
// step sizes halving per level; features are a random linear image of the
// prototype plus unit Gaussian noise; attribute vectors are subtree means of
// prototypes plus noise. Novel instances come from unseen children of
// internal nodes and are labeled with that internal node.
Dataset synth_generate(const SynthConfig& config);

// Label of the i-th child path, e.g. {0, 2} -> "n0_2"; {} -> "root".
std::string synth_label(const std::vector<int>& digits);

// ---------------------------------------------------------------------------
// Benchmark task views.

enum class TaskKind { kFineGrainedTrain, kFineGrainedZeroShot, kLevel, kFree };

struct Task {
  TaskKind kind = TaskKind::kFree;
  int level = 0;       // kLevel only
  std::string split;   // kLevel / kFree; empty selects the default split
};

// finegrained-train | finegrained-zeroshot | level-<l> | free
Task parse_task(const std::string& name);
std::string task_name(const Task& task);

struct TaskView {
  std::string split;
  std::vector<const Instance*> instances;
  std::vector<LabelId> candidates;  // ascending
  std::vector<LabelId> truth;       // per instance
};

// Level tasks drop instances whose ground truth lies above the level.
// Throws kEmptySplit, kEmptyLevel.
TaskView split_candidates(const Dataset& ds, const Task& task);

}  // namespace hzsl
