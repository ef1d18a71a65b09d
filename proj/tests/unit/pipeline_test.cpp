#include <gtest/gtest.h>

#include <sstream>

#include "core/error.hpp"
#include "core/pipeline.hpp"
#include "support/fixtures.hpp"

using hzsl::LabelId;

namespace {

// One trained pipeline on the small synthetic set, shared by the eval tests.
struct Trained {
  hzsl::Dataset ds;
  hzsl::EvalModels models;
};

hzsl::TrainSettings quick_settings() {
  hzsl::TrainSettings s;
  s.head.epochs = 15;
  s.compat.epochs = 15;
  s.crf.epochs = 6;
  s.hidden_dim = 16;
  return s;
}

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    out.ds = hzsl::synth_generate(fixtures::small_synth(31));
    const auto s = quick_settings();
    auto head = hzsl::train_model(out.ds, hzsl::ModelKind::kConseHead, s);
    auto compat = hzsl::train_model(out.ds, hzsl::ModelKind::kDevise, s);
    auto crf = hzsl::train_model(out.ds, hzsl::ModelKind::kCrf, s,
                                 head.checkpoint, compat.checkpoint);
    const auto fp = out.ds.hierarchy->fingerprint();
    out.models.head = hzsl::SoftmaxHead::from_checkpoint(head.checkpoint, fp);
    out.models.compat = hzsl::CompatModel::from_checkpoint(compat.checkpoint, fp);
    out.models.crf = hzsl::CrfModel::from_checkpoint(crf.checkpoint, out.ds.hierarchy,
                                                     out.ds.attributes);
    return out;
  }();
  return t;
}

hzsl::EvalReport eval(const std::string& task, std::vector<std::string> methods,
                      hzsl::UtilityKind u = hzsl::UtilityKind::kExactMatch) {
  hzsl::EvalOptions opt;
  opt.task = hzsl::parse_task(task);
  opt.methods = std::move(methods);
  opt.utility = u;
  return hzsl::run_eval(trained().ds, trained().models, opt);
}

const hzsl::ReportRow& row(const hzsl::EvalReport& r, const std::string& method) {
  for (const auto& x : r.rows) {
    if (x.method == method) return x;
  }
  throw std::runtime_error("no row " + method);
}

}  // namespace

TEST(BuildTree, PrunesThenResolves) {
  hzsl::WeightedDigraph g;
  g.add_edge("animal", "entity");
  g.add_edge("dog", "animal");
  g.add_edge("dog", "pet", 2.0);
  g.add_edge("pet", "entity");
  g.add_edge("rock", "entity");
  auto r = hzsl::build_tree(g, {"dog"}, "entity");
  EXPECT_EQ(r.nodes, 4u);
  // animal keeps its support edge during pruning and only loses dog afterwards.
  EXPECT_EQ(r.leaves, 2u);
  EXPECT_EQ(r.hierarchy.label(r.hierarchy.parent(r.hierarchy.id("dog"))), "pet");
}

TEST(Settings, DefaultsRoundTripThroughJson) {
  hzsl::TrainSettings d;
  auto back = hzsl::parse_train_settings(hzsl::train_settings_json(d));
  EXPECT_EQ(hzsl::train_settings_json(back), hzsl::train_settings_json(d));
  EXPECT_EQ(back.crf.clip_norm, 10.0);
  EXPECT_EQ(back.hidden_dim, 64);
}

TEST(Settings, OverridesAndSeed) {
  auto s = hzsl::parse_train_settings(
      R"({"seed": 99, "crf": {"epochs": 3, "init": {"w_compat": -2}},
          "compat": {"hidden_dim": 8}, "conse": {"m": 4}})");
  EXPECT_EQ(s.crf.epochs, 3);
  EXPECT_EQ(s.crf_init.w_compat, -2.0);
  EXPECT_EQ(s.hidden_dim, 8);
  EXPECT_EQ(s.conse.m, 4);
  EXPECT_EQ(s.head.seed, 99u);
  EXPECT_EQ(s.crf_init.seed, 99u);
  EXPECT_EQ(s.head.epochs, hzsl::TrainSettings{}.head.epochs);
}

TEST(Settings, RejectsBadInput) {
  for (const char* text :
       {"{\"crf\": {\"epoch\": 3}}", "{\"bogus\": 1}", "not json",
        "{\"head\": {\"learning_rate\": -1}}", "{\"seed\": -3}",
        "{\"crf\": {\"epochs\": 1.5}}", "{\"conse\": {\"m\": 0}}"}) {
    try {
      hzsl::parse_train_settings(text);
      ADD_FAILURE() << text;
    } catch (const hzsl::Error& e) {
      EXPECT_EQ(e.code(), hzsl::ErrorCode::kConfigInvalid) << text;
    }
  }
}

TEST(Train, CrfNeedsPrerequisites) {
  const auto& ds = trained().ds;
  try {
    hzsl::train_model(ds, hzsl::ModelKind::kCrf, quick_settings());
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kMissingPrerequisiteCheckpoint);
  }
}

TEST(Train, ZeroEpochsIsInitialization) {
  const auto& ds = trained().ds;
  auto s = quick_settings();
  s.compat.epochs = 0;
  auto r = hzsl::train_model(ds, hzsl::ModelKind::kDevise, s);
  auto init = hzsl::CompatModel::initialize(ds.feature_dim, s.hidden_dim,
                                            ds.attributes->dim(), s.compat.seed);
  EXPECT_EQ(r.checkpoint, init.to_checkpoint(ds.hierarchy->fingerprint()));
  EXPECT_EQ(r.loss_trace.size(), 1u);
}

TEST(Train, DeterministicCheckpoints) {
  const auto& ds = trained().ds;
  auto a = hzsl::train_model(ds, hzsl::ModelKind::kConseHead, quick_settings());
  auto b = hzsl::train_model(ds, hzsl::ModelKind::kConseHead, quick_settings());
  std::ostringstream oa, ob;
  hzsl::write_checkpoint(oa, a.checkpoint);
  hzsl::write_checkpoint(ob, b.checkpoint);
  EXPECT_EQ(oa.str(), ob.str());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(LossTrace, RoundTripAndErrors) {
  fixtures::TempDir dir;
  std::vector<double> trace{2.5, 1.0 / 3.0, 1e-300};
  hzsl::save_loss_trace(dir.file("t.loss"), trace);
  EXPECT_EQ(hzsl::load_loss_trace(dir.file("t.loss")), trace);
  fixtures::write_file(dir.file("bad.loss"), "# format: loss-trace v1\n0\t1\n2\t3\n");
  EXPECT_THROW(hzsl::load_loss_trace(dir.file("bad.loss")), hzsl::Error);
}

TEST(Eval, LevelZeroIsPerfect) {
  auto r = eval("level-0", {"crf-native", "lifted:devise", "direct:conse"});
  for (const auto& x : r.rows) EXPECT_EQ(x.accuracy, 1.0) << x.method;
}

TEST(Eval, LiftedDominatesFineGrained) {
  // Same base, same instances: level 2 is the fine-grained prediction itself.
  for (const char* base : {"devise", "conse", "crf"}) {
    hzsl::EvalOptions fine;
    fine.task = hzsl::parse_task("level-2");
    fine.methods = {std::string("lifted:") + base};
    auto at2 = hzsl::run_eval(trained().ds, trained().models, fine);
    fine.task = hzsl::parse_task("level-1");
    auto at1 = hzsl::run_eval(trained().ds, trained().models, fine);
    EXPECT_GE(at1.rows[0].accuracy, at2.rows[0].accuracy) << base;
    EXPECT_EQ(at1.rows[0].count, at2.rows[0].count);
  }
}

TEST(Eval, FreeExactAccuracyEqualsMeanExactUtility) {
  auto r = eval("free", {"crf-native"}, hzsl::UtilityKind::kExactMatch);
  const auto& x = row(r, "crf-native");
  EXPECT_EQ(x.rule, "max-eu:exact");
  ASSERT_TRUE(x.mean_usd && x.mean_upl);
  // Recompute mean exact utility from predictions.
  const auto& ds = trained().ds;
  const auto view = hzsl::split_candidates(ds, hzsl::parse_task("free"));
  hzsl::UtilitySpec exact(hzsl::UtilityKind::kExactMatch, *ds.hierarchy);
  std::vector<std::pair<LabelId, LabelId>> pairs;
  for (std::size_t i = 0; i < view.instances.size(); ++i) {
    auto d = hzsl::predict_distribution(*trained().models.crf, view.instances[i]->features);
    pairs.emplace_back(hzsl::predict_max_utility(d, exact).node, view.truth[i]);
  }
  EXPECT_DOUBLE_EQ(x.accuracy, hzsl::mean_utility(pairs, exact));
}

TEST(Eval, ReportEchoAndErrors) {
  auto r = eval("finegrained-train", {"crf-native", "lifted:conse"});
  EXPECT_EQ(r.task, "finegrained-train");
  EXPECT_EQ(r.split, hzsl::kSplitTrainClasses);
  EXPECT_EQ(r.config.at("methods"), "crf-native lifted:conse");
  EXPECT_FALSE(r.wall_clock_seconds.has_value());
  EXPECT_EQ(row(r, "crf-native").rule, "max-path");

  EXPECT_THROW(eval("free", {"lifted:crf"}), hzsl::Error);
  EXPECT_THROW(eval("free", {"crf-magic"}), hzsl::Error);
  hzsl::EvalOptions opt;
  opt.task = hzsl::parse_task("level-1");
  opt.methods = {"direct:devise"};
  try {
    hzsl::run_eval(trained().ds, hzsl::EvalModels{}, opt);
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kMissingPrerequisiteCheckpoint);
  }
}

TEST(Eval, Deterministic) {
  auto a = eval("level-1", {"crf-native", "lifted:crf", "direct:devise"});
  auto b = eval("level-1", {"crf-native", "lifted:crf", "direct:devise"});
  EXPECT_EQ(a, b);
}
