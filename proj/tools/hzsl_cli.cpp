// hzsl command-line harness. Links only the C interface.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hzsl/hzsl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

int exit_code(hzsl_status s) {
  if (s == HZSL_OK) return kExitOk;
  if (s == HZSL_NUMERICAL_CHECK_FAILED || s == HZSL_NON_FINITE_ENERGY) {
    return kExitNumerical;
  }
  return kExitValidation;
}

int report(hzsl_status s) {
  if (s != HZSL_OK) {
    std::cerr << "error (" << hzsl_status_name(s)
              << "): " << hzsl_last_error_message() << '\n';
  }
  return exit_code(s);
}

const char* opt_cstr(const std::string& s) {
  return s.empty() ? nullptr : s.c_str();
}

// Owns a malloc'd string returned by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { hzsl_string_free(p); }
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("HZSL_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') {
    throw CLI::ValidationError("HZSL_SEED", std::string("not an integer: ") + v);
  }
  return s;
}

// Seed precedence: --seed, then HZSL_SEED, then the command default.
std::optional<std::uint64_t> resolve_seed(const CLI::Option* opt,
                                          std::uint64_t flag_value) {
  if (opt->count() > 0) return flag_value;
  return env_seed();
}

bool write_text(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

hzsl_utility parse_utility(const std::string& s) {
  if (s == "pathlen") return HZSL_UTILITY_PATH_LENGTH;
  if (s == "subtreedepth") return HZSL_UTILITY_SUBTREE_DEPTH;
  return HZSL_UTILITY_EXACT;
}

struct DatasetHandle {
  hzsl_dataset* p = nullptr;
  ~DatasetHandle() { hzsl_dataset_free(p); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical zero-shot classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hzsl_version()));
  app.footer(
      "Environment:\n"
      "  HZSL_SEED   default seed for synth, train, eval and gradcheck when\n"
      "              --seed is not given\n"
      "Exit codes: 0 success, 1 validation error, 2 numerical-check failure");

  int rc = kExitOk;

  // build-tree ---------------------------------------------------------------
  auto* bt = app.add_subcommand(
      "build-tree",
      "Prune an is-a graph to the ancestors of a keep set and extract the "
      "maximum-weight tree rooted at --root");
  std::string bt_graph, bt_keep, bt_root, bt_out;
  bt->add_option("--graph", bt_graph,
                 "edge list: child<TAB>parent[<TAB>weight] per line")
      ->required()->check(CLI::ExistingFile);
  bt->add_option("--keep", bt_keep, "labels to keep, one per line")
      ->required()->check(CLI::ExistingFile);
  bt->add_option("--root", bt_root, "root label")->required();
  bt->add_option("--out", bt_out, "output hierarchy file")->required();
  bt->callback([&] {
    size_t nodes = 0, leaves = 0;
    auto s = hzsl_build_tree(bt_graph.c_str(), bt_keep.c_str(), bt_root.c_str(),
                             bt_out.c_str(), &nodes, &leaves);
    rc = report(s);
    if (s == HZSL_OK) {
      std::cout << "nodes=" << nodes << " leaves=" << leaves << '\n';
    }
  });

  // synth --------------------------------------------------------------------
  auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset");
  hzsl_synth_config sc;
  hzsl_synth_config_default(&sc);
  std::string sy_out;
  std::uint64_t sy_seed = sc.seed;
  sy->add_option("--out", sy_out, "output directory (must exist)")
      ->required()->check(CLI::ExistingDirectory);
  sy->add_option("--depth", sc.depth, "tree depth")->capture_default_str();
  sy->add_option("--branching", sc.branching, "children per internal node")
      ->capture_default_str();
  sy->add_option("--feature-dim", sc.feature_dim, "feature dimension")
      ->capture_default_str();
  sy->add_option("--embed-dim", sc.embed_dim, "attribute dimension")
      ->capture_default_str();
  sy->add_option("--instances-per-leaf", sc.instances_per_leaf)
      ->capture_default_str();
  sy->add_option("--test-fraction", sc.test_fraction,
                 "held-out share of each training leaf")
      ->capture_default_str();
  sy->add_option("--zeroshot-fraction", sc.zeroshot_fraction,
                 "share of leaves withheld from training")
      ->capture_default_str();
  sy->add_option("--novel-fraction", sc.novel_fraction,
                 "novel classes per leaf (ground truth is the nearest known "
                 "ancestor)")
      ->capture_default_str();
  sy->add_option("--separation", sc.separation,
                 "sibling-leaf mean distance over noise sd")
      ->capture_default_str();
  sy->add_option("--attribute-noise", sc.attribute_noise)->capture_default_str();
  auto* sy_seed_opt = sy->add_option("--seed", sy_seed, "generator seed")
                          ->capture_default_str();
  sy->callback([&] {
    if (auto s = resolve_seed(sy_seed_opt, sy_seed)) sc.seed = *s;
    rc = report(hzsl_synth_write(&sc, sy_out.c_str()));
  });

  // train --------------------------------------------------------------------
  auto* tr = app.add_subcommand(
      "train", "Train one model; crf requires head and compat checkpoints");
  std::string tr_data, tr_model, tr_config, tr_head, tr_compat, tr_out, tr_loss;
  std::uint64_t tr_seed = 0;
  bool tr_print = false;
  tr->add_option("--data", tr_data,
                 "dataset directory (hierarchy.tsv, embeddings.txt, "
                 "features.tsv, splits.tsv)");
  tr->add_option("--model", tr_model, "conse-head | devise | crf")
      ->check(CLI::IsMember({"conse-head", "devise", "crf"}));
  tr->add_option("--config", tr_config, "training configuration (JSON)")
      ->check(CLI::ExistingFile);
  tr->add_option("--head", tr_head, "pretrained conse-head checkpoint");
  tr->add_option("--compat", tr_compat, "pretrained devise checkpoint");
  tr->add_option("--out", tr_out, "output checkpoint");
  tr->add_option("--loss-trace", tr_loss,
                 "loss trace output (default: <out>.loss)");
  auto* tr_seed_opt =
      tr->add_option("--seed", tr_seed, "overrides every seed in the config");
  tr->add_flag("--print-default-config", tr_print,
               "print the default configuration as JSON and exit");
  tr->callback([&] {
    if (tr_print) {
      OwnedString js;
      rc = report(hzsl_default_train_config(&js.p));
      if (rc == kExitOk) std::cout << js.p << '\n';
      return;
    }
    if (tr_data.empty() || tr_model.empty() || tr_out.empty()) {
      throw CLI::ValidationError("train", "--data, --model and --out are required");
    }
    DatasetHandle ds;
    if ((rc = report(hzsl_dataset_load(tr_data.c_str(), &ds.p))) != kExitOk) return;
    const auto seed = resolve_seed(tr_seed_opt, tr_seed);
    const std::string loss = tr_loss.empty() ? tr_out + ".loss" : tr_loss;
    rc = report(hzsl_train(ds.p, tr_model.c_str(), opt_cstr(tr_config),
                           opt_cstr(tr_head), opt_cstr(tr_compat),
                           seed.value_or(0), seed.has_value(), tr_out.c_str(),
                           loss.c_str()));
  });

  // eval ---------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Evaluate models on a benchmark task");
  std::string ev_data, ev_task = "free", ev_split, ev_methods = "crf-native";
  std::string ev_head, ev_compat, ev_crf, ev_out, ev_utility = "exact";
  std::string ev_norm = "diameter";
  int ev_level = -1;
  int ev_m = 10;
  bool ev_timing = false;
  std::uint64_t ev_seed = 7;
  ev->add_option("--data", ev_data, "dataset directory")
      ->required()->check(CLI::ExistingDirectory);
  ev->add_option("--task", ev_task,
                 "finegrained-train | finegrained-zeroshot | level | "
                 "level-<l> | free")
      ->capture_default_str();
  ev->add_option("--level", ev_level, "level for --task level");
  ev->add_option("--split", ev_split,
                 "test split (default depends on the task)");
  ev->add_option("--methods", ev_methods,
                 "comma-separated: crf-native, lifted:{devise,conse,crf}, "
                 "direct:{devise,conse}")
      ->capture_default_str();
  ev->add_option("--head", ev_head, "conse-head checkpoint");
  ev->add_option("--compat", ev_compat, "devise checkpoint");
  ev->add_option("--crf", ev_crf, "crf checkpoint");
  ev->add_option("--utility", ev_utility,
                 "decision utility for crf-native on the free task")
      ->check(CLI::IsMember({"exact", "pathlen", "subtreedepth"}))
      ->capture_default_str();
  ev->add_option("--pathlen-norm", ev_norm,
                 "path-length normalizer: diameter | maxdepth")
      ->check(CLI::IsMember({"diameter", "maxdepth"}))
      ->capture_default_str();
  ev->add_option("--conse-m", ev_m, "ConSE top-m")->capture_default_str();
  ev->add_flag("--timing", ev_timing, "record wall-clock seconds in the report");
  ev->add_option("--out", ev_out, "machine-readable report (CSV)");
  auto* ev_seed_opt =
      ev->add_option("--seed", ev_seed, "seed echoed in the report")
          ->capture_default_str();
  ev->callback([&] {
    std::string task = ev_task;
    if (task == "level") {
      if (ev_level < 0) throw CLI::ValidationError("--level", "required for --task level");
      task = "level-" + std::to_string(ev_level);
    } else if (ev_level >= 0) {
      throw CLI::ValidationError("--level", "only valid with --task level");
    }
    DatasetHandle ds;
    if ((rc = report(hzsl_dataset_load(ev_data.c_str(), &ds.p))) != kExitOk) return;
    hzsl_eval_request req;
    hzsl_eval_request_default(&req);
    req.task = task.c_str();
    req.split = opt_cstr(ev_split);
    req.methods = ev_methods.c_str();
    req.utility = parse_utility(ev_utility);
    req.pathlen_max_depth = ev_norm == "maxdepth";
    req.conse_m = ev_m;
    req.head_ckpt = opt_cstr(ev_head);
    req.compat_ckpt = opt_cstr(ev_compat);
    req.crf_ckpt = opt_cstr(ev_crf);
    req.seed = resolve_seed(ev_seed_opt, ev_seed).value_or(ev_seed);
    req.timing = ev_timing;
    req.report_path = opt_cstr(ev_out);
    OwnedString table;
    rc = report(hzsl_eval(ds.p, &req, &table.p));
    if (rc == kExitOk) std::cout << table.p;
  });

  // gradcheck ----------------------------------------------------------------
  auto* gc = app.add_subcommand(
      "gradcheck", "Compare analytic CRF gradients with finite differences");
  std::uint64_t gc_seed = 1;
  int gc_tree = 9, gc_points = 10;
  bool gc_corrupt = false;
  auto* gc_seed_opt =
      gc->add_option("--seed", gc_seed, "seed")->capture_default_str();
  gc->add_option("--tree-size", gc_tree, "nodes in the random tree")
      ->capture_default_str();
  gc->add_option("--points", gc_points, "random parameter points")
      ->capture_default_str();
  gc->add_flag("--corrupt", gc_corrupt,
               "perturb the analytic gradient (negative control)");
  gc->callback([&] {
    const auto seed = resolve_seed(gc_seed_opt, gc_seed).value_or(gc_seed);
    hzsl_gradcheck_result res{};
    OwnedString text;
    auto s = hzsl_gradcheck(seed, gc_tree, gc_points, gc_corrupt, &res, &text.p);
    if (s != HZSL_OK) {
      rc = report(s);
      return;
    }
    std::cout << "group\tsize\tmax_rel_error\n" << text.p;
    std::cout << (res.passed ? "PASS" : "FAIL") << '\n';
    rc = res.passed ? kExitOk : kExitNumerical;
  });

  // dump-attributes ----------------------------------------------------------
  auto* da = app.add_subcommand(
      "dump-attributes",
      "Write the attribute vectors of the hierarchy's nodes in embedding "
      "format");
  std::string da_data, da_hier, da_emb, da_out;
  auto* da_data_opt = da->add_option("--data", da_data, "dataset directory");
  auto* da_hier_opt = da->add_option("--hierarchy", da_hier, "hierarchy file");
  auto* da_emb_opt = da->add_option("--embeddings", da_emb, "embedding file");
  da_data_opt->excludes(da_hier_opt)->excludes(da_emb_opt);
  da_hier_opt->needs(da_emb_opt);
  da_emb_opt->needs(da_hier_opt);
  da->add_option("--out", da_out, "output file (default: stdout)");
  da->callback([&] {
    OwnedString text;
    hzsl_status s;
    if (!da_data.empty()) {
      DatasetHandle ds;
      s = hzsl_dataset_load(da_data.c_str(), &ds.p);
      if (s == HZSL_OK) s = hzsl_dataset_dump_attributes(ds.p, &text.p);
    } else if (!da_hier.empty()) {
      hzsl_hierarchy* h = nullptr;
      s = hzsl_hierarchy_load(da_hier.c_str(), &h);
      if (s == HZSL_OK) s = hzsl_dump_attributes(h, da_emb.c_str(), &text.p);
      hzsl_hierarchy_free(h);
    } else {
      throw CLI::ValidationError("dump-attributes",
                                 "give --data or --hierarchy with --embeddings");
    }
    if ((rc = report(s)) != kExitOk) return;
    if (!write_text(da_out, text.p)) {
      std::cerr << "error (io): cannot write '" << da_out << "'\n";
      rc = kExitValidation;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  return rc;
}
