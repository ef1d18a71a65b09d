#include "core/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "core/error.hpp"
#include "core/lifted.hpp"
#include "core/random.hpp"
#include "core/text.hpp"
#include "json.hpp"

namespace hzsl {

// ---------------------------------------------------------------------------
// build-tree

BuildTreeResult build_tree(const WeightedDigraph& graph,
                           const std::set<std::string>& keep,
                           const std::string& root) {
  auto pruned = prune_to_support(graph, keep);
  auto tree = max_arborescence(pruned, root);
  BuildTreeResult out{std::move(tree)};
  out.nodes = out.hierarchy.size();
  out.leaves = out.hierarchy.leaves().size();
  return out;
}

// ---------------------------------------------------------------------------
// train settings

ModelKind parse_model_kind(const std::string& name) {
  if (name == "conse-head") return ModelKind::kConseHead;
  if (name == "devise") return ModelKind::kDevise;
  if (name == "crf") return ModelKind::kCrf;
  fail(ErrorCode::kInvalidArgument,
       "unknown model '" + name + "' (expected conse-head|devise|crf)");
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kConseHead: return "conse-head";
    case ModelKind::kDevise: return "devise";
    case ModelKind::kCrf: return "crf";
  }
  return "?";
}

void TrainSettings::set_seed(std::uint64_t seed) {
  head.seed = seed;
  compat.seed = seed;
  crf.seed = seed;
  crf_init.seed = seed;
}

namespace {

using json = nlohmann::json;

[[noreturn]] void bad_config(const std::string& msg) {
  fail(ErrorCode::kConfigInvalid, "config: " + msg);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_config(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad_config("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_number(const json& obj, const char* key, const std::string& where,
                 T& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) {
      bad_config(where + "." + key + " must be an integer");
    }
    out = v.get<T>();
  } else {
    if (!v.is_number()) bad_config(where + "." + key + " must be a number");
    out = v.get<T>();
  }
}

void read_train_config(const json& obj, const std::string& where,
                       TrainConfig& cfg, bool compat, bool crf,
                       TrainSettings& s) {
  if (compat) {
    check_keys(obj, where, {"learning_rate", "epochs", "batch_size", "lr_decay",
                            "decay_every", "clip_norm", "hidden_dim"});
    read_number(obj, "hidden_dim", where, s.hidden_dim);
  } else if (crf) {
    check_keys(obj, where, {"learning_rate", "epochs", "batch_size", "lr_decay",
                            "decay_every", "clip_norm", "init"});
    if (obj.contains("init")) {
      const auto& init = obj.at("init");
      check_keys(init, where + ".init", {"w_linear", "w_compat", "w_conse"});
      read_number(init, "w_linear", where + ".init", s.crf_init.w_linear);
      read_number(init, "w_compat", where + ".init", s.crf_init.w_compat);
      read_number(init, "w_conse", where + ".init", s.crf_init.w_conse);
    }
  } else {
    check_keys(obj, where, {"learning_rate", "epochs", "batch_size", "lr_decay",
                            "decay_every", "clip_norm"});
  }
  read_number(obj, "learning_rate", where, cfg.learning_rate);
  read_number(obj, "epochs", where, cfg.epochs);
  read_number(obj, "batch_size", where, cfg.batch_size);
  read_number(obj, "lr_decay", where, cfg.lr_decay);
  read_number(obj, "decay_every", where, cfg.decay_every);
  read_number(obj, "clip_norm", where, cfg.clip_norm);
}

json train_config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_decay", c.lr_decay},
          {"decay_every", c.decay_every},
          {"clip_norm", c.clip_norm}};
}

}  // namespace

TrainSettings parse_train_settings(const std::string& json_text,
                                   const TrainSettings& defaults) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad_config(std::string("invalid JSON: ") + e.what());
  }
  TrainSettings s = defaults;
  check_keys(doc, "config", {"head", "compat", "crf", "conse", "seed"});
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) {
      bad_config("seed must be a non-negative integer");
    }
    s.set_seed(doc.at("seed").get<std::uint64_t>());
  }
  if (doc.contains("head")) {
    read_train_config(doc.at("head"), "head", s.head, false, false, s);
  }
  if (doc.contains("compat")) {
    read_train_config(doc.at("compat"), "compat", s.compat, true, false, s);
  }
  if (doc.contains("crf")) {
    read_train_config(doc.at("crf"), "crf", s.crf, false, true, s);
  }
  if (doc.contains("conse")) {
    check_keys(doc.at("conse"), "conse", {"m"});
    read_number(doc.at("conse"), "m", "conse", s.conse.m);
  }
  validate(s.head);
  validate(s.compat);
  validate(s.crf);
  if (s.hidden_dim < 1) bad_config("compat.hidden_dim must be >= 1");
  if (s.conse.m < 1) bad_config("conse.m must be >= 1");
  return s;
}

TrainSettings load_train_settings(const std::string& path,
                                  const TrainSettings& defaults) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_train_settings(buf.str(), defaults);
}

std::string train_settings_json(const TrainSettings& s) {
  json doc;
  doc["seed"] = s.crf.seed;
  doc["head"] = train_config_json(s.head);
  doc["compat"] = train_config_json(s.compat);
  doc["compat"]["hidden_dim"] = s.hidden_dim;
  doc["crf"] = train_config_json(s.crf);
  doc["crf"]["init"] = {{"w_linear", s.crf_init.w_linear},
                        {"w_compat", s.crf_init.w_compat},
                        {"w_conse", s.crf_init.w_conse}};
  doc["conse"] = {{"m", s.conse.m}};
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// train

namespace {

ConseConfig effective_conse(ConseConfig cfg, std::size_t classes) {
  cfg.m = std::min<int>(cfg.m, static_cast<int>(classes));
  return cfg;
}

}  // namespace

TrainOutputs train_model(const Dataset& ds, ModelKind kind,
                         const TrainSettings& settings,
                         const std::optional<Checkpoint>& head_ckpt,
                         const std::optional<Checkpoint>& compat_ckpt) {
  const auto fp = ds.hierarchy->fingerprint();
  switch (kind) {
    case ModelKind::kConseHead: {
      auto r = train_softmax_head(ds.train, ds.train_classes, settings.head);
      return {r.head.to_checkpoint(fp), std::move(r.loss_trace)};
    }
    case ModelKind::kDevise: {
      auto init = CompatModel::initialize(ds.feature_dim, settings.hidden_dim,
                                          ds.attributes->dim(),
                                          settings.compat.seed);
      auto r = train_compat(std::move(init), ds.train, *ds.attributes,
                            ds.train_classes, settings.compat);
      return {r.model.to_checkpoint(fp), std::move(r.loss_trace)};
    }
    case ModelKind::kCrf: {
      if (!head_ckpt) {
        fail(ErrorCode::kMissingPrerequisiteCheckpoint,
             "crf training needs a pretrained conse-head checkpoint");
      }
      if (!compat_ckpt) {
        fail(ErrorCode::kMissingPrerequisiteCheckpoint,
             "crf training needs a pretrained devise checkpoint");
      }
      auto head = SoftmaxHead::from_checkpoint(*head_ckpt, fp);
      auto compat = CompatModel::from_checkpoint(*compat_ckpt, fp);
      const auto conse = effective_conse(settings.conse, head.classes().size());
      auto model = CrfModel::initialize(ds.hierarchy, ds.attributes,
                                        std::move(head), std::move(compat),
                                        conse, settings.crf_init);
      auto r = train_crf(std::move(model), ds.train, settings.crf);
      return {r.model.to_checkpoint(), std::move(r.loss_trace)};
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown model kind");
}

void save_loss_trace(const std::string& path,
                     const std::vector<double>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  text::write_format_line(out, "loss-trace");
  for (std::size_t e = 0; e < trace.size(); ++e) {
    out << e << '\t' << text::format_double(trace[e]) << '\n';
  }
}

std::vector<double> load_loss_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<double> trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 &&
        text::check_format_line(line, "loss-trace", text::where(path, line_no))) {
      continue;
    }
    if (text::trim(line).empty() || line.front() == '#') continue;
    auto f = text::split(line, '\t');
    auto e = f.size() == 2 ? text::parse_int(f[0]) : std::nullopt;
    auto v = f.size() == 2 ? text::parse_double(f[1]) : std::nullopt;
    if (!e || !v || *e != static_cast<std::int64_t>(trace.size())) {
      fail(ErrorCode::kParse, text::where(path, line_no) + ": expected epoch<TAB>loss");
    }
    trace.push_back(*v);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// eval

void check_method(const std::string& m) {
  static const char* known[] = {"crf-native",   "lifted:devise", "lifted:conse",
                                "lifted:crf",   "direct:devise", "direct:conse"};
  for (const char* k : known) {
    if (m == k) return;
  }
  fail(ErrorCode::kInvalidArgument,
       "unknown method '" + m +
           "' (expected crf-native|lifted:{devise,conse,crf}|direct:{devise,conse})");
}

namespace {

struct Scorers {
  std::unique_ptr<BaseScorer> devise, conse, crf;
};

const BaseScorer& scorer_for(const Scorers& s, const std::string& base) {
  const std::unique_ptr<BaseScorer>* p = nullptr;
  const char* needs = "";
  if (base == "devise") {
    p = &s.devise;
    needs = "a devise checkpoint";
  } else if (base == "conse") {
    p = &s.conse;
    needs = "a conse-head checkpoint";
  } else {
    p = &s.crf;
    needs = "a crf checkpoint";
  }
  if (!*p) {
    fail(ErrorCode::kMissingPrerequisiteCheckpoint,
         "method base '" + base + "' needs " + needs);
  }
  return **p;
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : sep) + s;
  return out;
}

}  // namespace

EvalReport run_eval(const Dataset& ds, const EvalModels& models,
                    const EvalOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  if (opt.methods.empty()) {
    fail(ErrorCode::kInvalidArgument, "no evaluation methods given");
  }
  for (const auto& m : opt.methods) check_method(m);
  const auto& h = *ds.hierarchy;
  const auto view = split_candidates(ds, opt.task);

  Scorers scorers;
  if (models.compat) {
    scorers.devise =
        std::make_unique<DeviseScorer>(*models.compat, *ds.attributes);
  }
  if (models.head) {
    scorers.conse = std::make_unique<ConseScorer>(
        *models.head, *ds.attributes,
        effective_conse(opt.conse, models.head->classes().size()));
  }
  if (models.crf) scorers.crf = std::make_unique<CrfScorer>(*models.crf);

  std::vector<LabelId> all_nodes(h.size());
  for (LabelId v = 0; v < static_cast<LabelId>(h.size()); ++v) all_nodes[v] = v;
  std::vector<LabelId> fine_leaves;
  if (opt.task.kind == TaskKind::kLevel) {
    for (LabelId leaf : h.leaves()) {
      if (h.depth(leaf) >= opt.task.level) fine_leaves.push_back(leaf);
    }
  }

  const UtilitySpec chosen(opt.utility, h, opt.norm);
  EvalReport report;
  report.task = task_name(opt.task);
  report.split = view.split;
  report.seed = opt.seed;
  report.config["methods"] = join(opt.methods, " ");
  report.config["utility"] = std::string(utility_kind_name(opt.utility));
  report.config["pathlen_norm"] =
      opt.norm == PathLengthNorm::kDiameter ? "diameter" : "max-depth";
  report.config["conse.m"] = std::to_string(opt.conse.m);
  report.config["hierarchy"] = text::hex64(h.fingerprint());

  const bool fine =
      opt.task.kind == TaskKind::kFineGrainedTrain ||
      opt.task.kind == TaskKind::kFineGrainedZeroShot;
  for (const auto& method : opt.methods) {
    ReportRow row;
    row.method = method;
    if (opt.task.kind == TaskKind::kLevel) row.level = opt.task.level;
    std::vector<LabelId> preds;
    preds.reserve(view.instances.size());
    if (method == "crf-native") {
      if (!models.crf) {
        fail(ErrorCode::kMissingPrerequisiteCheckpoint,
             "crf-native needs a crf checkpoint");
      }
      row.rule = fine ? "max-path"
                 : opt.task.kind == TaskKind::kLevel
                     ? "subtree-mass"
                     : "max-eu:" + std::string(utility_kind_name(opt.utility));
      for (const Instance* inst : view.instances) {
        const auto dist = predict_distribution(*models.crf, inst->features);
        if (fine) {
          preds.push_back(predict_restricted(dist, view.candidates));
        } else if (opt.task.kind == TaskKind::kLevel) {
          preds.push_back(predict_within_level(h, dist, opt.task.level));
        } else {
          preds.push_back(predict_max_utility(dist, chosen).node);
        }
      }
    } else {
      const auto colon = method.find(':');
      const std::string family = method.substr(0, colon);
      const auto& scorer = scorer_for(scorers, method.substr(colon + 1));
      for (const Instance* inst : view.instances) {
        const auto& x = inst->features;
        if (fine) {
          preds.push_back(view.candidates[argmax_by_label(
              view.candidates, scorer.score(x, view.candidates))]);
        } else if (family == "lifted") {
          if (opt.task.kind != TaskKind::kLevel) {
            fail(ErrorCode::kInvalidArgument,
                 method + " needs a level or fine-grained task");
          }
          preds.push_back(
              lift_predict(scorer, x, fine_leaves, opt.task.level, h));
        } else if (opt.task.kind == TaskKind::kLevel) {
          preds.push_back(direct_within_level(scorer, x, h, opt.task.level));
        } else {
          preds.push_back(
              all_nodes[argmax_by_label(all_nodes, scorer.score(x, all_nodes))]);
        }
      }
      row.rule = fine ? "argmax" : family == "lifted" ? "lift" : "direct";
    }

    std::vector<std::pair<LabelId, LabelId>> pairs;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      correct += preds[i] == view.truth[i];
      pairs.emplace_back(preds[i], view.truth[i]);
    }
    row.count = preds.size();
    row.accuracy = static_cast<double>(correct) / static_cast<double>(row.count);
    if (opt.task.kind == TaskKind::kFree) {
      row.mean_upl =
          mean_utility(pairs, UtilitySpec(UtilityKind::kPathLength, h, opt.norm));
      row.mean_usd =
          mean_utility(pairs, UtilitySpec(UtilityKind::kSubtreeDepth, h));
    }
    report.rows.push_back(std::move(row));
  }
  if (opt.timing) {
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
  }
  return report;
}

// ---------------------------------------------------------------------------
// gradcheck

namespace {

struct GradProblem {
  std::unique_ptr<CrfModel> model;
  std::vector<Instance> batch;
};

GradProblem random_problem(std::uint64_t seed, int tree_size) {
  Rng rng(seed);
  constexpr int kFeature = 5, kHidden = 6, kEmbed = 4, kBatch = 4;
  auto name = [](int i) {
    std::string s = std::to_string(i);
    return "c" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
  };
  std::vector<LabelEdge> edges;
  for (int i = 1; i < tree_size; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    edges.emplace_back(name(i), name(pick(rng)));
  }
  auto h = std::make_shared<const LabelHierarchy>(
      LabelHierarchy::build_from_edges(edges));
  Eigen::MatrixXd a(h->size(), kEmbed);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    a.row(r) = normal_vector(kEmbed, 1.0, rng).transpose();
  }
  auto attrs = std::make_shared<const AttributeTable>(h->symbols(), a);
  auto leaves = h->leaves();
  auto head = SoftmaxHead(leaves, uniform_matrix(leaves.size(), kFeature, 1.0, rng),
                          normal_vector(leaves.size(), 0.5, rng));
  CompatModel compat(uniform_matrix(kHidden, kFeature, 1.0, rng),
                     uniform_matrix(kEmbed, kHidden, 1.0, rng));
  const auto n = static_cast<Eigen::Index>(h->size());
  CrfParameters p;
  p.w_linear = normal_vector(n, 1.0, rng);
  p.w_compat = normal_vector(n, 1.0, rng);
  p.w_conse = normal_vector(n, 1.0, rng);
  p.bias = normal_vector(1, 1.0, rng)(0);
  p.linear = uniform_matrix(n, kFeature, 1.0, rng);
  p.compat = std::move(compat);
  GradProblem out;
  out.model = std::make_unique<CrfModel>(
      h, attrs, std::move(head),
      ConseConfig{std::min<int>(2, static_cast<int>(leaves.size()))},
      std::move(p));
  std::uniform_int_distribution<LabelId> label(0, static_cast<LabelId>(n - 1));
  for (int i = 0; i < kBatch; ++i) {
    LabelId y = label(rng);
    if (y == h->root()) y = leaves.front();
    out.batch.push_back({"x" + std::to_string(i),
                         normal_vector(kFeature, 1.0, rng), y});
  }
  return out;
}

// Visits every scalar of a parameter group in a fixed order.
template <typename Fn>
void for_each_group(CrfParameters& p, Fn&& fn) {
  auto flat = [](auto& m) { return std::span<double>(m.data(), m.size()); };
  fn("w_linear", flat(p.w_linear));
  fn("w_compat", flat(p.w_compat));
  fn("w_conse", flat(p.w_conse));
  fn("linear", flat(p.linear));
  fn("w1", flat(p.compat.w1()));
  fn("w2", flat(p.compat.w2()));
  fn("bias", std::span<double>(&p.bias, 1));
}

}  // namespace

GradCheckResult gradient_check(std::uint64_t seed, int tree_size, int points,
                               bool corrupt) {
  if (tree_size < 2) fail(ErrorCode::kConfigInvalid, "tree size must be >= 2");
  if (points < 1) fail(ErrorCode::kConfigInvalid, "points must be >= 1");
  constexpr double kStep = 1e-6;
  GradCheckResult result;
  result.points = points;
  std::map<std::string, GradCheckGroup> groups;
  std::vector<std::string> order;
  bool bias_ok = true;
  for (int pt = 0; pt < points; ++pt) {
    auto prob = random_problem(seed * 1000003ULL + static_cast<std::uint64_t>(pt),
                               tree_size);
    CrfModel& model = *prob.model;
    auto analytic = nll_gradient(model, prob.batch);
    if (corrupt) {
      for_each_group(analytic, [](const char*, std::span<double> g) {
        for (double& v : g) v = v * 1.01 + 1e-3;
      });
    }
    std::vector<std::pair<std::string, std::vector<double>>> want;
    for_each_group(analytic, [&](const char* name, std::span<double> g) {
      want.emplace_back(name, std::vector<double>(g.begin(), g.end()));
    });
    std::size_t gi = 0;
    for_each_group(model.params(), [&](const char* name, std::span<double> g) {
      const auto& a = want[gi++].second;
      double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double saved = g[i];
        g[i] = saved + kStep;
        const double up = nll(model, prob.batch);
        g[i] = saved - kStep;
        const double down = nll(model, prob.batch);
        g[i] = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        diff2 += (a[i] - numeric) * (a[i] - numeric);
        an2 += a[i] * a[i];
        nu2 += numeric * numeric;
      }
      auto& grp = groups[name];
      if (grp.name.empty()) {
        grp.name = name;
        grp.size = g.size();
        order.push_back(name);
      }
      if (std::string(name) == "bias") {
        // The bias cancels in the normalizer: its gradient must vanish.
        result.max_bias_grad = std::max(result.max_bias_grad, std::abs(a[0]));
        grp.max_rel_error = std::max(grp.max_rel_error, std::sqrt(diff2));
        bias_ok = bias_ok && std::abs(a[0]) <= 1e-12 && std::sqrt(nu2) <= 1e-6;
        return;
      }
      const double rel = std::sqrt(diff2) /
                         std::max(std::sqrt(an2) + std::sqrt(nu2), 1e-8);
      grp.max_rel_error = std::max(grp.max_rel_error, rel);
    });
  }
  result.passed = bias_ok;
  for (const auto& name : order) {
    const auto& g = groups[name];
    if (name != "bias" && !(g.max_rel_error < result.threshold)) {
      result.passed = false;
    }
    result.groups.push_back(g);
  }
  return result;
}

}  // namespace hzsl
