#include "hzsl/hzsl.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "core/crf.hpp"
#include "core/dataio.hpp"
#include "core/error.hpp"
#include "core/pipeline.hpp"
#include "core/report.hpp"
#include "core/text.hpp"
#include "core/utility.hpp"

struct hzsl_hierarchy {
  std::shared_ptr<const hzsl::LabelHierarchy> h;
};

struct hzsl_dataset {
  hzsl::Dataset ds;
  hzsl_hierarchy view;
};

struct hzsl_model {
  std::unique_ptr<hzsl::CrfModel> crf;
};

namespace {

thread_local std::string g_last_error;

hzsl_status to_status(hzsl::ErrorCode code) {
  return static_cast<hzsl_status>(static_cast<int>(code));
}

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename F>
hzsl_status guarded(F&& body) {
  try {
    body();
    return HZSL_OK;
  } catch (const hzsl::Error& e) {
    std::string msg = e.what();
    if (!e.subjects().empty()) {
      msg += " [";
      for (std::size_t i = 0; i < e.subjects().size(); ++i) {
        if (i) msg += ", ";
        msg += e.subjects()[i];
      }
      msg += "]";
    }
    set_error(msg);
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return HZSL_INTERNAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return HZSL_INTERNAL;
  } catch (...) {
    set_error("unknown exception");
    return HZSL_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) hzsl::fail(hzsl::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

hzsl::LabelId checked_node(const hzsl_hierarchy* h, int32_t id) {
  require(h != nullptr, "null hierarchy");
  if (!h->h->contains(id)) {
    hzsl::fail(hzsl::ErrorCode::kUnknownLabel,
               "node id " + std::to_string(id) + " out of range");
  }
  return id;
}

hzsl::UtilityKind to_utility(hzsl_utility u) {
  switch (u) {
    case HZSL_UTILITY_EXACT: return hzsl::UtilityKind::kExactMatch;
    case HZSL_UTILITY_PATH_LENGTH: return hzsl::UtilityKind::kPathLength;
    case HZSL_UTILITY_SUBTREE_DEPTH: return hzsl::UtilityKind::kSubtreeDepth;
  }
  hzsl::fail(hzsl::ErrorCode::kInvalidArgument, "unknown utility kind");
}

std::vector<std::string> split_methods(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  if (out.empty()) {
    hzsl::fail(hzsl::ErrorCode::kInvalidArgument, "no evaluation methods given");
  }
  return out;
}

Eigen::VectorXd feature_vector(const hzsl_model* m, const double* features,
                               size_t dim) {
  require(m != nullptr && features != nullptr, "null argument");
  if (static_cast<int>(dim) != m->crf->feature_dim()) {
    hzsl::fail(hzsl::ErrorCode::kDimensionMismatch,
               "feature vector has dimension " + std::to_string(dim) +
                   ", model expects " + std::to_string(m->crf->feature_dim()));
  }
  return Eigen::Map<const Eigen::VectorXd>(features, static_cast<Eigen::Index>(dim));
}

}  // namespace

extern "C" {

const char* hzsl_version(void) { return "0.1.0"; }

const char* hzsl_status_name(hzsl_status status) {
  if (status == HZSL_INTERNAL) return "internal";
  return hzsl::error_code_name(static_cast<hzsl::ErrorCode>(status));
}

const char* hzsl_last_error_message(void) { return g_last_error.c_str(); }

void hzsl_string_free(char* s) { std::free(s); }

hzsl_status hzsl_hierarchy_load(const char* path, hzsl_hierarchy** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new hzsl_hierarchy{std::make_shared<const hzsl::LabelHierarchy>(
        hzsl::load_hierarchy(path))};
  });
}

hzsl_status hzsl_hierarchy_from_edges(const char* const* children,
                                      const char* const* parents,
                                      size_t n_edges, hzsl_hierarchy** out) {
  return guarded([&] {
    require(out && (n_edges == 0 || (children && parents)), "null argument");
    std::vector<hzsl::LabelEdge> edges;
    edges.reserve(n_edges);
    for (size_t i = 0; i < n_edges; ++i) {
      require(children[i] && parents[i], "null label");
      edges.emplace_back(children[i], parents[i]);
    }
    *out = new hzsl_hierarchy{std::make_shared<const hzsl::LabelHierarchy>(
        hzsl::LabelHierarchy::build_from_edges(edges))};
  });
}

void hzsl_hierarchy_free(hzsl_hierarchy* h) { delete h; }

hzsl_status hzsl_hierarchy_save(const hzsl_hierarchy* h, const char* path) {
  return guarded([&] {
    require(h && path, "null argument");
    hzsl::save_hierarchy(path, *h->h);
  });
}

size_t hzsl_hierarchy_size(const hzsl_hierarchy* h) {
  return h ? h->h->size() : 0;
}

int32_t hzsl_hierarchy_root(const hzsl_hierarchy* h) {
  return h ? h->h->root() : -1;
}

hzsl_status hzsl_hierarchy_id(const hzsl_hierarchy* h, const char* label,
                              int32_t* out) {
  return guarded([&] {
    require(h && label && out, "null argument");
    *out = h->h->id(label);
  });
}

hzsl_status hzsl_hierarchy_label(const hzsl_hierarchy* h, int32_t id,
                                 const char** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = h->h->label(checked_node(h, id)).c_str();
  });
}

hzsl_status hzsl_hierarchy_parent(const hzsl_hierarchy* h, int32_t id,
                                  int32_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = h->h->parent(checked_node(h, id));
  });
}

hzsl_status hzsl_hierarchy_depth(const hzsl_hierarchy* h, int32_t id,
                                 int32_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = h->h->depth(checked_node(h, id));
  });
}

hzsl_status hzsl_hierarchy_ancestor(const hzsl_hierarchy* h, int32_t id,
                                    int32_t level, int32_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = h->h->ancestor(checked_node(h, id), level);
  });
}

hzsl_status hzsl_hierarchy_distance(const hzsl_hierarchy* h, int32_t a,
                                    int32_t b, int32_t* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = h->h->tree_distance(checked_node(h, a), checked_node(h, b));
  });
}

uint64_t hzsl_hierarchy_fingerprint(const hzsl_hierarchy* h) {
  return h ? h->h->fingerprint() : 0;
}

hzsl_status hzsl_build_tree(const char* graph_path, const char* keep_path,
                            const char* root, const char* out_path,
                            size_t* n_nodes, size_t* n_leaves) {
  return guarded([&] {
    require(graph_path && keep_path && root && out_path, "null argument");
    auto graph = hzsl::load_digraph(graph_path);
    auto keep = hzsl::load_label_set(keep_path);
    auto result = hzsl::build_tree(graph, keep, root);
    hzsl::save_hierarchy(out_path, result.hierarchy);
    if (n_nodes) *n_nodes = result.nodes;
    if (n_leaves) *n_leaves = result.leaves;
  });
}

hzsl_status hzsl_utility_value(const hzsl_hierarchy* h, hzsl_utility kind,
                               int32_t predicted, int32_t truth, double* out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    checked_node(h, predicted);
    checked_node(h, truth);
    hzsl::UtilitySpec spec(to_utility(kind), *h->h);
    *out = spec(predicted, truth);
  });
}

void hzsl_synth_config_default(hzsl_synth_config* cfg) {
  if (!cfg) return;
  const hzsl::SynthConfig d;
  cfg->depth = d.depth;
  cfg->branching = d.branching;
  cfg->feature_dim = d.feature_dim;
  cfg->embed_dim = d.embed_dim;
  cfg->instances_per_leaf = d.instances_per_leaf;
  cfg->test_fraction = d.test_fraction;
  cfg->zeroshot_fraction = d.zeroshot_fraction;
  cfg->novel_fraction = d.novel_fraction;
  cfg->separation = d.separation;
  cfg->attribute_noise = d.attribute_noise;
  cfg->seed = d.seed;
}

hzsl_status hzsl_synth_write(const hzsl_synth_config* cfg,
                             const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "null argument");
    hzsl::SynthConfig c;
    c.depth = cfg->depth;
    c.branching = cfg->branching;
    c.feature_dim = cfg->feature_dim;
    c.embed_dim = cfg->embed_dim;
    c.instances_per_leaf = cfg->instances_per_leaf;
    c.test_fraction = cfg->test_fraction;
    c.zeroshot_fraction = cfg->zeroshot_fraction;
    c.novel_fraction = cfg->novel_fraction;
    c.separation = cfg->separation;
    c.attribute_noise = cfg->attribute_noise;
    c.seed = cfg->seed;
    auto ds = hzsl::synth_generate(c);
    hzsl::save_dataset(hzsl::DatasetPaths::in_dir(out_dir), ds);
  });
}

hzsl_status hzsl_dataset_load(const char* dir, hzsl_dataset** out) {
  return guarded([&] {
    require(dir && out, "null argument");
    auto ds = std::make_unique<hzsl_dataset>();
    ds->ds = hzsl::load_dataset(hzsl::DatasetPaths::in_dir(dir));
    ds->view.h = ds->ds.hierarchy;
    *out = ds.release();
  });
}

void hzsl_dataset_free(hzsl_dataset* ds) { delete ds; }

const hzsl_hierarchy* hzsl_dataset_hierarchy(const hzsl_dataset* ds) {
  return ds ? &ds->view : nullptr;
}

int32_t hzsl_dataset_feature_dim(const hzsl_dataset* ds) {
  return ds ? ds->ds.feature_dim : 0;
}

size_t hzsl_dataset_split_size(const hzsl_dataset* ds, const char* split) {
  if (!ds || !split) return 0;
  if (std::strcmp(split, hzsl::kSplitTrain) == 0) return ds->ds.train.size();
  auto it = ds->ds.tests.find(split);
  return it == ds->ds.tests.end() ? 0 : it->second.size();
}

hzsl_status hzsl_dataset_dump_attributes(const hzsl_dataset* ds, char** out) {
  return guarded([&] {
    require(ds && out, "null argument");
    std::ostringstream os;
    hzsl::write_embeddings(os, *ds->ds.attributes);
    *out = dup_string(os.str());
  });
}

hzsl_status hzsl_dump_attributes(const hzsl_hierarchy* h,
                                 const char* embeddings_path, char** out) {
  return guarded([&] {
    require(h && embeddings_path && out, "null argument");
    auto table = hzsl::load_embeddings(embeddings_path, h->h->symbols());
    std::ostringstream os;
    hzsl::write_embeddings(os, table);
    *out = dup_string(os.str());
  });
}

hzsl_status hzsl_train(const hzsl_dataset* ds, const char* model,
                       const char* config_path, const char* head_ckpt,
                       const char* compat_ckpt, uint64_t seed, int seed_given,
                       const char* out_ckpt, const char* loss_path) {
  return guarded([&] {
    require(ds && model && out_ckpt, "null argument");
    const auto kind = hzsl::parse_model_kind(model);
    auto settings = config_path ? hzsl::load_train_settings(config_path)
                                : hzsl::TrainSettings{};
    if (seed_given) settings.set_seed(seed);
    std::optional<hzsl::Checkpoint> head, compat;
    if (head_ckpt) head = hzsl::load_checkpoint(head_ckpt);
    if (compat_ckpt) compat = hzsl::load_checkpoint(compat_ckpt);
    auto result = hzsl::train_model(ds->ds, kind, settings, head, compat);
    hzsl::save_checkpoint(out_ckpt, result.checkpoint);
    if (loss_path) hzsl::save_loss_trace(loss_path, result.loss_trace);
  });
}

hzsl_status hzsl_default_train_config(char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "null argument");
    *out_json = dup_string(hzsl::train_settings_json(hzsl::TrainSettings{}));
  });
}

void hzsl_eval_request_default(hzsl_eval_request* req) {
  if (!req) return;
  *req = hzsl_eval_request{};
  req->task = "free";
  req->methods = "crf-native";
  req->utility = HZSL_UTILITY_EXACT;
  req->conse_m = hzsl::ConseConfig{}.m;
  req->seed = 7;
}

hzsl_status hzsl_eval(const hzsl_dataset* ds, const hzsl_eval_request* req,
                      char** table) {
  return guarded([&] {
    require(ds && req && req->task && req->methods, "null argument");
    hzsl::EvalOptions opt;
    opt.task = hzsl::parse_task(req->task);
    if (req->split) opt.task.split = req->split;
    opt.methods = split_methods(req->methods);
    for (const auto& m : opt.methods) hzsl::check_method(m);
    opt.utility = to_utility(req->utility);
    opt.norm = req->pathlen_max_depth ? hzsl::PathLengthNorm::kMaxDepth
                                      : hzsl::PathLengthNorm::kDiameter;
    opt.conse.m = req->conse_m;
    opt.seed = req->seed;
    opt.timing = req->timing != 0;

    const auto fp = ds->ds.hierarchy->fingerprint();
    hzsl::EvalModels models;
    if (req->head_ckpt) {
      models.head = hzsl::SoftmaxHead::from_checkpoint(
          hzsl::load_checkpoint(req->head_ckpt), fp);
    }
    if (req->compat_ckpt) {
      models.compat = hzsl::CompatModel::from_checkpoint(
          hzsl::load_checkpoint(req->compat_ckpt), fp);
    }
    if (req->crf_ckpt) {
      models.crf = hzsl::CrfModel::from_checkpoint(
          hzsl::load_checkpoint(req->crf_ckpt), ds->ds.hierarchy,
          ds->ds.attributes);
    }
    auto report = hzsl::run_eval(ds->ds, models, opt);
    if (req->report_path) hzsl::save_report(req->report_path, report);
    if (table) *table = dup_string(hzsl::render_table(report));
  });
}

hzsl_status hzsl_model_load(const char* crf_ckpt, const hzsl_dataset* ds,
                            hzsl_model** out) {
  return guarded([&] {
    require(crf_ckpt && ds && out, "null argument");
    auto m = std::make_unique<hzsl_model>();
    m->crf = std::make_unique<hzsl::CrfModel>(hzsl::CrfModel::from_checkpoint(
        hzsl::load_checkpoint(crf_ckpt), ds->ds.hierarchy, ds->ds.attributes));
    *out = m.release();
  });
}

void hzsl_model_free(hzsl_model* m) { delete m; }

hzsl_status hzsl_model_path_distribution(const hzsl_model* m,
                                         const double* features, size_t dim,
                                         double* out, size_t out_len) {
  return guarded([&] {
    auto h = feature_vector(m, features, dim);
    require(out != nullptr, "null argument");
    const auto n = m->crf->hierarchy().size();
    if (out_len != n) {
      hzsl::fail(hzsl::ErrorCode::kDimensionMismatch,
                 "output buffer has " + std::to_string(out_len) +
                     " entries, hierarchy has " + std::to_string(n));
    }
    auto dist = hzsl::predict_distribution(*m->crf, h);
    for (size_t i = 0; i < n; ++i) out[i] = dist.prob(static_cast<Eigen::Index>(i));
  });
}

hzsl_status hzsl_model_predict(const hzsl_model* m, const double* features,
                               size_t dim, hzsl_utility utility, int32_t* node,
                               double* expected_utility) {
  return guarded([&] {
    auto h = feature_vector(m, features, dim);
    require(node != nullptr, "null argument");
    auto dist = hzsl::predict_distribution(*m->crf, h);
    hzsl::UtilitySpec spec(to_utility(utility), m->crf->hierarchy());
    auto pred = hzsl::predict_max_utility(dist, spec);
    *node = pred.node;
    if (expected_utility) *expected_utility = pred.expected_utility;
  });
}

hzsl_status hzsl_gradcheck(uint64_t seed, int32_t tree_size, int32_t points,
                           int corrupt, hzsl_gradcheck_result* result,
                           char** report) {
  return guarded([&] {
    require(result != nullptr, "null argument");
    auto r = hzsl::gradient_check(seed, tree_size, points, corrupt != 0);
    result->passed = r.passed ? 1 : 0;
    result->max_rel_error = 0.0;
    for (const auto& g : r.groups) {
      if (g.name != "bias") {
        result->max_rel_error = std::max(result->max_rel_error, g.max_rel_error);
      }
    }
    result->max_bias_grad = r.max_bias_grad;
    if (report) {
      std::ostringstream os;
      for (const auto& g : r.groups) {
        os << g.name << '\t' << g.size << '\t'
           << hzsl::text::format_double(g.max_rel_error) << '\n';
      }
      os << "bias_grad\t" << hzsl::text::format_double(r.max_bias_grad) << '\n';
      *report = dup_string(os.str());
    }
  });
}

}  // extern "C"
