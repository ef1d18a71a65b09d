#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/crf.hpp"
#include "core/dataio.hpp"
#include "core/report.hpp"
#include "core/utility.hpp"
#include "core/zsl_base.hpp"

namespace hzsl {

// ---------------------------------------------------------------------------
// build-tree

struct BuildTreeResult {
  LabelHierarchy hierarchy;
  std::size_t nodes = 0;
  std::size_t leaves = 0;
};

// prune_to_support then max_arborescence.
BuildTreeResult build_tree(const WeightedDigraph& graph,
                           const std::set<std::string>& keep,
                           const std::string& root);

// ---------------------------------------------------------------------------
// train

enum class ModelKind { kConseHead, kDevise, kCrf };
ModelKind parse_model_kind(const std::string& name);  // conse-head|devise|crf
std::string model_kind_name(ModelKind kind);

struct TrainSettings {
  TrainConfig head{0.5, 40, 32, 7, 0.5, 15};
  TrainConfig compat{0.01, 60, 32, 7, 0.5, 20};
  TrainConfig crf{0.05, 25, 32, 7, 0.5, 8, 10.0};
  int hidden_dim = 64;
  ConseConfig conse;
  CrfInit crf_init{0.0, -3.0, -1.0, 7};

  // Sets every seed (training order and initialization).
  void set_seed(std::uint64_t seed);
};

// JSON object with optional sections "head", "compat", "crf" (each:
// learning_rate, epochs, batch_size, lr_decay, decay_every, clip_norm), "compat.
// hidden_dim", "crf.init" {w_linear, w_compat, w_conse}, "conse" {m} and
// "seed". Unknown keys are rejected with kConfigInvalid.
TrainSettings parse_train_settings(const std::string& json_text,
                                   const TrainSettings& defaults = {});
TrainSettings load_train_settings(const std::string& path,
                                  const TrainSettings& defaults = {});
std::string train_settings_json(const TrainSettings& settings);

struct TrainOutputs {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;
};

// `head_ckpt` and `compat_ckpt` are required for kCrf
// (kMissingPrerequisiteCheckpoint otherwise).
TrainOutputs train_model(const Dataset& ds, ModelKind kind,
                         const TrainSettings& settings,
                         const std::optional<Checkpoint>& head_ckpt = {},
                         const std::optional<Checkpoint>& compat_ckpt = {});

// "# format: loss-trace v1" then "epoch<TAB>loss" lines.
void save_loss_trace(const std::string& path, const std::vector<double>& trace);
std::vector<double> load_loss_trace(const std::string& path);

// ---------------------------------------------------------------------------
// eval

struct EvalModels {
  std::optional<SoftmaxHead> head;
  std::optional<CompatModel> compat;
  std::optional<CrfModel> crf;
};

struct EvalOptions {
  Task task;
  // crf-native | lifted:{devise,conse,crf} | direct:{devise,conse}
  std::vector<std::string> methods;
  UtilityKind utility = UtilityKind::kExactMatch;
  PathLengthNorm norm = PathLengthNorm::kDiameter;
  ConseConfig conse;
  std::uint64_t seed = 7;
  bool timing = false;
};

// Validates a method name; throws kInvalidArgument.
void check_method(const std::string& method);

EvalReport run_eval(const Dataset& ds, const EvalModels& models,
                    const EvalOptions& options);

// ---------------------------------------------------------------------------
// gradcheck

struct GradCheckGroup {
  std::string name;
  std::size_t size = 0;
  double max_rel_error = 0.0;  // over all points
};

struct GradCheckResult {
  std::vector<GradCheckGroup> groups;
  double max_bias_grad = 0.0;
  double threshold = 1e-4;
  int points = 0;
  bool passed = false;
};

// Central differences against nll_gradient on a random tree. `corrupt`
// perturbs the analytic gradient (negative control).
GradCheckResult gradient_check(std::uint64_t seed, int tree_size = 9,
                               int points = 10, bool corrupt = false);

}  // namespace hzsl
