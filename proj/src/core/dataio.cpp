#include "core/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "core/error.hpp"
#include "core/random.hpp"
#include "core/text.hpp"

namespace hzsl {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  return out;
}

bool same_vectors(const std::vector<Instance>& a,
                  const std::vector<Instance>& b) {
  return a == b;
}

// Content lines of a versioned text file, with line numbers.
template <typename OnLine>
void for_each_line(std::istream& in, const std::string& name,
                   std::string_view format, OnLine&& on_line) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 &&
        text::check_format_line(line, format, text::where(name, line_no))) {
      continue;
    }
    if (text::trim(line).empty() || line.front() == '#') continue;
    on_line(std::string_view(line), line_no);
  }
}

struct RawInstance {
  Instance instance;
  std::size_t line_no = 0;
};

}  // namespace

const std::vector<Instance>& Dataset::split(const std::string& name) const {
  if (name == kSplitTrain) return train;
  auto it = tests.find(name);
  if (it == tests.end()) {
    fail(ErrorCode::kEmptySplit, "dataset has no split '" + name + "'");
  }
  return it->second;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (!a.hierarchy || !b.hierarchy || !a.attributes || !b.attributes) {
    return false;
  }
  if (a.tests.size() != b.tests.size()) return false;
  for (const auto& [name, rows] : a.tests) {
    auto it = b.tests.find(name);
    if (it == b.tests.end() || !same_vectors(rows, it->second)) return false;
  }
  return *a.hierarchy == *b.hierarchy && *a.attributes == *b.attributes &&
         same_vectors(a.train, b.train) &&
         a.train_classes == b.train_classes &&
         a.zeroshot_classes == b.zeroshot_classes &&
         a.feature_dim == b.feature_dim;
}

DatasetPaths DatasetPaths::in_dir(const std::string& dir) {
  const std::string base = dir.empty() || dir.back() == '/' ? dir : dir + "/";
  return {base + "hierarchy.tsv", base + "embeddings.txt",
          base + "features.tsv", base + "splits.tsv"};
}

Dataset assemble_dataset(std::shared_ptr<const LabelHierarchy> hierarchy,
                         std::shared_ptr<const AttributeTable> attributes,
                         std::vector<Instance> train,
                         std::map<std::string, std::vector<Instance>> tests) {
  const auto& h = *hierarchy;
  if (attributes->symbols().labels() != h.symbols().labels()) {
    fail(ErrorCode::kCrossFileInconsistency,
         "attribute labels differ from hierarchy labels");
  }
  if (train.empty()) {
    fail(ErrorCode::kEmptyDataset, "dataset has no training instances");
  }
  if (tests.count(kSplitTrain)) {
    fail(ErrorCode::kCrossFileInconsistency,
         "'train' cannot also be a test split");
  }
  Dataset ds;
  ds.feature_dim = static_cast<int>(train.front().features.size());

  std::unordered_set<std::string> ids;
  auto check = [&](const Instance& inst, const std::string& split) {
    if (!ids.insert(inst.id).second) {
      fail(ErrorCode::kCrossFileInconsistency,
           "duplicate instance id '" + inst.id + "'", {inst.id});
    }
    if (!h.contains(inst.label)) {
      fail(ErrorCode::kCrossFileInconsistency,
           "instance '" + inst.id + "' has a label outside the hierarchy",
           {inst.id});
    }
    if (inst.label == h.root()) {
      fail(ErrorCode::kCrossFileInconsistency,
           "instance '" + inst.id + "' is labeled with the root", {inst.id});
    }
    if (inst.features.size() != ds.feature_dim) {
      fail(ErrorCode::kCrossFileInconsistency,
           "instance '" + inst.id + "' has " +
               std::to_string(inst.features.size()) + " features, expected " +
               std::to_string(ds.feature_dim),
           {inst.id});
    }
    if (!inst.features.allFinite()) {
      fail(ErrorCode::kCrossFileInconsistency,
           "instance '" + inst.id + "' has non-finite features", {inst.id});
    }
    (void)split;
  };

  std::set<LabelId> seen;
  for (const auto& inst : train) {
    check(inst, kSplitTrain);
    seen.insert(inst.label);
  }
  ds.train_classes.assign(seen.begin(), seen.end());
  for (LabelId leaf : h.leaves()) {
    if (!seen.count(leaf)) ds.zeroshot_classes.push_back(leaf);
  }

  for (const auto& [name, rows] : tests) {
    for (const auto& inst : rows) {
      check(inst, name);
      const std::string& label = h.label(inst.label);
      if (name == kSplitTrainClasses && !seen.count(inst.label)) {
        fail(ErrorCode::kCrossFileInconsistency,
             "instance '" + inst.id + "' in split '" + name +
                 "' has unseen class '" + label + "'",
             {inst.id});
      }
      if (name == kSplitZeroShot && seen.count(inst.label)) {
        fail(ErrorCode::kCrossFileInconsistency,
             "instance '" + inst.id + "' in split '" + name +
                 "' has training class '" + label + "'",
             {inst.id});
      }
      if (name == kSplitNovel && h.is_leaf(inst.label)) {
        fail(ErrorCode::kCrossFileInconsistency,
             "novel instance '" + inst.id + "' must be labeled with an "
             "interior node, got leaf '" + label + "'",
             {inst.id});
      }
    }
  }
  ds.hierarchy = std::move(hierarchy);
  ds.attributes = std::move(attributes);
  ds.train = std::move(train);
  ds.tests = std::move(tests);
  return ds;
}

Dataset load_dataset(const DatasetPaths& paths) {
  auto hierarchy =
      std::make_shared<const LabelHierarchy>(load_hierarchy(paths.hierarchy));
  auto attributes = std::make_shared<const AttributeTable>(
      load_embeddings(paths.embeddings, hierarchy->symbols()));

  std::vector<RawInstance> rows;
  {
    auto in = open_input(paths.features);
    long dim = -1;
    for_each_line(in, paths.features, "features",
                  [&](std::string_view line, std::size_t line_no) {
      const auto at = text::where(paths.features, line_no);
      auto fields = text::split(line, '\t');
      if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
        fail(ErrorCode::kParse, at + ": expected id<TAB>label<TAB>values");
      }
      auto label = hierarchy->symbols().find(fields[1]);
      if (!label) {
        fail(ErrorCode::kCrossFileInconsistency,
             at + ": label '" + std::string(fields[1]) +
                 "' is not in the hierarchy",
             {std::string(fields[1])});
      }
      auto tokens = text::split_ws(fields[2]);
      if (dim < 0) dim = static_cast<long>(tokens.size());
      if (tokens.empty() || static_cast<long>(tokens.size()) != dim) {
        fail(ErrorCode::kParse, at + ": expected " + std::to_string(dim) +
                                    " feature values, found " +
                                    std::to_string(tokens.size()));
      }
      RawInstance raw;
      raw.line_no = line_no;
      raw.instance.id = std::string(fields[0]);
      raw.instance.label = *label;
      raw.instance.features.resize(dim);
      for (long i = 0; i < dim; ++i) {
        auto v = text::parse_double(tokens[i]);
        if (!v || !std::isfinite(*v)) {
          fail(ErrorCode::kParse,
               at + ": bad feature value '" + std::string(tokens[i]) + "'");
        }
        raw.instance.features(i) = *v;
      }
      rows.push_back(std::move(raw));
    });
  }
  if (rows.empty()) {
    fail(ErrorCode::kEmptyDataset, paths.features + ": no instances");
  }

  std::unordered_map<std::string, std::string> split_of;
  {
    auto in = open_input(paths.splits);
    for_each_line(in, paths.splits, "splits",
                  [&](std::string_view line, std::size_t line_no) {
      const auto at = text::where(paths.splits, line_no);
      auto fields = text::split(line, '\t');
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
        fail(ErrorCode::kParse, at + ": expected id<TAB>split");
      }
      if (!split_of.emplace(std::string(fields[0]), std::string(fields[1]))
               .second) {
        fail(ErrorCode::kParse,
             at + ": instance '" + std::string(fields[0]) +
                 "' assigned twice");
      }
    });
  }

  std::vector<Instance> train;
  std::map<std::string, std::vector<Instance>> tests;
  std::unordered_set<std::string> ids;
  for (auto& raw : rows) {
    const auto at = text::where(paths.features, raw.line_no);
    if (!ids.insert(raw.instance.id).second) {
      fail(ErrorCode::kParse,
           at + ": duplicate instance id '" + raw.instance.id + "'");
    }
    auto it = split_of.find(raw.instance.id);
    if (it == split_of.end()) {
      fail(ErrorCode::kCrossFileInconsistency,
           at + ": instance '" + raw.instance.id + "' has no split in " +
               paths.splits,
           {raw.instance.id});
    }
    if (it->second == kSplitTrain) {
      train.push_back(std::move(raw.instance));
    } else {
      tests[it->second].push_back(std::move(raw.instance));
    }
  }
  for (const auto& [id, split] : split_of) {
    if (!ids.count(id)) {
      fail(ErrorCode::kCrossFileInconsistency,
           paths.splits + ": instance '" + id + "' has no features", {id});
    }
  }
  return assemble_dataset(std::move(hierarchy), std::move(attributes),
                          std::move(train), std::move(tests));
}

void write_features(std::ostream& out, const Dataset& ds) {
  text::write_format_line(out, "features");
  auto emit = [&](const Instance& inst) {
    out << inst.id << '\t' << ds.hierarchy->label(inst.label) << '\t';
    for (Eigen::Index i = 0; i < inst.features.size(); ++i) {
      if (i) out << ' ';
      out << text::format_double(inst.features(i));
    }
    out << '\n';
  };
  for (const auto& inst : ds.train) emit(inst);
  for (const auto& [name, rows] : ds.tests) {
    for (const auto& inst : rows) emit(inst);
  }
}

void write_splits(std::ostream& out, const Dataset& ds) {
  text::write_format_line(out, "splits");
  for (const auto& inst : ds.train) out << inst.id << '\t' << kSplitTrain << '\n';
  for (const auto& [name, rows] : ds.tests) {
    for (const auto& inst : rows) out << inst.id << '\t' << name << '\n';
  }
}

void save_dataset(const DatasetPaths& paths, const Dataset& ds) {
  save_hierarchy(paths.hierarchy, *ds.hierarchy);
  save_embeddings(paths.embeddings, *ds.attributes);
  {
    auto out = open_output(paths.features);
    write_features(out, ds);
  }
  auto out = open_output(paths.splits);
  write_splits(out, ds);
}

// ---------------------------------------------------------------------------
// Synthetic generator

void validate(const SynthConfig& c) {
  auto bad = [](const std::string& msg) {
    fail(ErrorCode::kConfigInvalid, "synth: " + msg);
  };
  if (c.depth < 2) bad("depth must be >= 2");
  if (c.branching < 2) bad("branching must be >= 2");
  if (std::pow(double(c.branching), double(c.depth)) > 1e6) {
    bad("tree too large");
  }
  if (c.feature_dim < 1 || c.embed_dim < 1) bad("dimensions must be >= 1");
  if (c.instances_per_leaf < 1) bad("instances_per_leaf must be >= 1");
  auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!unit(c.test_fraction) || !unit(c.zeroshot_fraction) ||
      !std::isfinite(c.novel_fraction) || c.novel_fraction < 0.0) {
    bad("fractions must lie in [0, 1]");
  }
  const long held =
      std::lround(c.test_fraction * c.instances_per_leaf);
  if (held >= c.instances_per_leaf) {
    bad("test_fraction leaves no training instances per leaf");
  }
  const long leaves = std::lround(std::pow(c.branching, c.depth));
  if (std::lround(c.zeroshot_fraction * leaves) >= leaves) {
    bad("zeroshot_fraction leaves no training leaves");
  }
  if (!std::isfinite(c.separation) || c.separation <= 0.0) {
    bad("separation must be positive");
  }
  if (!std::isfinite(c.attribute_noise) || c.attribute_noise < 0.0) {
    bad("attribute_noise must be >= 0");
  }
}

std::string synth_label(const std::vector<int>& digits) {
  if (digits.empty()) return "root";
  std::string out = "n";
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i) out += '_';
    out += std::to_string(digits[i]);
  }
  return out;
}

Dataset synth_generate(const SynthConfig& c) {
  validate(c);
  Rng rng(c.seed);
  const int de = c.embed_dim;
  const int df = c.feature_dim;

  // Tree in BFS order with semantic prototypes.
  struct Node {
    std::vector<int> digits;
    int parent = -1;
    Eigen::VectorXd proto;
  };
  std::vector<Node> nodes;
  nodes.push_back({{}, -1, Eigen::VectorXd::Zero(de)});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (static_cast<int>(nodes[i].digits.size()) == c.depth) continue;
    const int k = static_cast<int>(nodes[i].digits.size()) + 1;
    const double step = std::ldexp(1.0, c.depth - k);
    for (int b = 0; b < c.branching; ++b) {
      Node child;
      child.digits = nodes[i].digits;
      child.digits.push_back(b);
      child.parent = static_cast<int>(i);
      child.proto = nodes[i].proto + normal_vector(de, step, rng);
      nodes.push_back(std::move(child));
    }
  }

  std::vector<LabelEdge> edges;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    edges.emplace_back(synth_label(nodes[i].digits),
                       synth_label(nodes[nodes[i].parent].digits));
  }
  auto hierarchy = std::make_shared<const LabelHierarchy>(
      LabelHierarchy::build_from_edges(edges));
  const auto& h = *hierarchy;
  std::vector<LabelId> id_of(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    id_of[i] = h.id(synth_label(nodes[i].digits));
  }

  // Attribute vectors: mean leaf prototype of each subtree, plus noise.
  Eigen::MatrixXd attr = Eigen::MatrixXd::Zero(h.size(), de);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(h.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!h.is_leaf(id_of[i])) continue;
    for (LabelId a : h.path(id_of[i])) {
      attr.row(a) += nodes[i].proto.transpose();
      counts(a) += 1.0;
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const LabelId v = id_of[i];
    attr.row(v) /= counts(v);
    attr.row(v) += normal_vector(de, c.attribute_noise, rng).transpose();
  }
  auto attributes = std::make_shared<const AttributeTable>(h.symbols(), attr);

  // Feature map: sibling leaves end up about `separation` apart.
  Eigen::MatrixXd map(df, de);
  {
    std::normal_distribution<double> entry(0.0, 1.0 / std::sqrt(double(df)));
    for (Eigen::Index r = 0; r < df; ++r) {
      for (Eigen::Index col = 0; col < de; ++col) map(r, col) = entry(rng);
    }
  }
  const double scale = c.separation / std::sqrt(2.0 * de);
  auto sample = [&](const Eigen::VectorXd& proto) -> Eigen::VectorXd {
    Eigen::VectorXd mean = scale * (map * proto);
    return mean + normal_vector(df, 1.0, rng);
  };

  // Zero-shot leaves by seeded shuffle.
  std::vector<std::size_t> leaf_nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (h.is_leaf(id_of[i])) leaf_nodes.push_back(i);
  }
  const auto n_zero = static_cast<std::size_t>(
      std::lround(c.zeroshot_fraction * leaf_nodes.size()));
  std::set<std::size_t> zero_shot;
  {
    auto order = shuffled_indices(leaf_nodes.size(), rng);
    for (std::size_t k = 0; k < n_zero; ++k) {
      zero_shot.insert(leaf_nodes[order[k]]);
    }
  }

  const auto n_held = static_cast<int>(
      std::lround(c.test_fraction * c.instances_per_leaf));
  std::vector<Instance> train;
  std::map<std::string, std::vector<Instance>> tests;
  auto instance_id = [](const std::string& label, int k) {
    std::string num = std::to_string(k);
    return label + "." + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') +
           num;
  };
  for (std::size_t i : leaf_nodes) {
    const std::string label = synth_label(nodes[i].digits);
    const bool zs = zero_shot.count(i) > 0;
    for (int k = 0; k < c.instances_per_leaf; ++k) {
      Instance inst{instance_id(label, k), sample(nodes[i].proto), id_of[i]};
      if (zs) {
        tests[kSplitZeroShot].push_back(std::move(inst));
      } else if (k < n_held) {
        tests[kSplitTrainClasses].push_back(std::move(inst));
      } else {
        train.push_back(std::move(inst));
      }
    }
  }

  // Novel classes: unseen children of random internal non-root nodes.
  std::vector<std::size_t> internal;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (!h.is_leaf(id_of[i])) internal.push_back(i);
  }
  const auto n_novel = static_cast<int>(
      std::lround(c.novel_fraction * leaf_nodes.size()));
  const int per_novel = std::max(1, n_held);
  std::uniform_int_distribution<std::size_t> pick(0, internal.size() - 1);
  for (int j = 0; j < n_novel; ++j) {
    const std::size_t anchor = internal[pick(rng)];
    const int k = static_cast<int>(nodes[anchor].digits.size()) + 1;
    const Eigen::VectorXd proto =
        nodes[anchor].proto + normal_vector(de, std::ldexp(1.0, c.depth - k), rng);
    for (int s = 0; s < per_novel; ++s) {
      tests[kSplitNovel].push_back(
          {instance_id("novel" + std::to_string(j), s), sample(proto),
           id_of[anchor]});
    }
  }

  return assemble_dataset(std::move(hierarchy), std::move(attributes),
                          std::move(train), std::move(tests));
}

// ---------------------------------------------------------------------------
// Tasks

Task parse_task(const std::string& name) {
  if (name == "finegrained-train") return {TaskKind::kFineGrainedTrain, 0, ""};
  if (name == "finegrained-zeroshot") {
    return {TaskKind::kFineGrainedZeroShot, 0, ""};
  }
  if (name == "free") return {TaskKind::kFree, 0, ""};
  if (name.rfind("level-", 0) == 0) {
    auto l = text::parse_int(std::string_view(name).substr(6));
    if (l && *l >= 0) return {TaskKind::kLevel, static_cast<int>(*l), ""};
  }
  fail(ErrorCode::kInvalidArgument,
       "unknown task '" + name +
           "' (expected finegrained-train|finegrained-zeroshot|level-<l>|free)");
}

std::string task_name(const Task& task) {
  switch (task.kind) {
    case TaskKind::kFineGrainedTrain: return "finegrained-train";
    case TaskKind::kFineGrainedZeroShot: return "finegrained-zeroshot";
    case TaskKind::kLevel: return "level-" + std::to_string(task.level);
    case TaskKind::kFree: return "free";
  }
  return "?";
}

TaskView split_candidates(const Dataset& ds, const Task& task) {
  const auto& h = *ds.hierarchy;
  TaskView view;
  switch (task.kind) {
    case TaskKind::kFineGrainedTrain:
      view.split = task.split.empty() ? kSplitTrainClasses : task.split;
      view.candidates = ds.train_classes;
      break;
    case TaskKind::kFineGrainedZeroShot:
      view.split = task.split.empty() ? kSplitZeroShot : task.split;
      view.candidates = ds.zeroshot_classes;
      break;
    case TaskKind::kLevel:
      view.split = task.split.empty() ? kSplitZeroShot : task.split;
      view.candidates = h.nodes_at_level(task.level);
      if (view.candidates.empty()) {
        fail(ErrorCode::kEmptyLevel,
             "no nodes at level " + std::to_string(task.level));
      }
      break;
    case TaskKind::kFree:
      view.split = task.split.empty() ? kSplitZeroShot : task.split;
      view.candidates.resize(h.size());
      for (LabelId v = 0; v < static_cast<LabelId>(h.size()); ++v) {
        view.candidates[v] = v;
      }
      break;
  }
  if (view.candidates.empty()) {
    fail(ErrorCode::kEmptyCandidates,
         "task " + task_name(task) + " has no candidates");
  }
  const bool has_split =
      view.split == kSplitTrain || ds.tests.count(view.split) > 0;
  if (!has_split) {
    fail(ErrorCode::kEmptySplit, "dataset has no split '" + view.split + "'");
  }
  for (const auto& inst : ds.split(view.split)) {
    if (task.kind == TaskKind::kLevel) {
      if (h.depth(inst.label) < task.level) continue;
      view.truth.push_back(h.ancestor(inst.label, task.level));
    } else {
      view.truth.push_back(inst.label);
    }
    view.instances.push_back(&inst);
  }
  if (view.instances.empty()) {
    fail(ErrorCode::kEmptySplit, "task " + task_name(task) + " on split '" +
                                     view.split + "' has no instances");
  }
  return view;
}

}  // namespace hzsl
