#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "core/checkpoint.hpp"
#include "core/crf.hpp"
#include "core/error.hpp"
#include "core/utility.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using hzsl::LabelId;

namespace {

hzsl::PathDistribution random_distribution(int n, hzsl::Rng& rng,
                                           double scale = 2.0) {
  return hzsl::path_distribution(hzsl::normal_vector(n, scale, rng));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

int scan_argmax(const std::vector<double>& v, const std::vector<LabelId>& among) {
  int best = -1;
  for (auto c : among) {
    if (best < 0 || v[c] > v[best]) best = c;
  }
  return best;
}

}  // namespace

TEST(Features, MatchStraightLineOracle) {
  hzsl::Rng rng(61);
  for (int t = 0; t < 20; ++t) {
    auto h = fixtures::random_tree(3 + t % 10, rng);
    auto model = fixtures::random_crf(h, rng);
    Eigen::VectorXd x = hzsl::normal_vector(5, 1.0, rng);
    auto got = hzsl::compute_features(*model, x);
    auto want = oracle::straight_line_features(*model, x);
    for (std::size_t c = 0; c < h->size(); ++c) {
      EXPECT_NEAR(got.linear(c), want.linear[c], 1e-12);
      EXPECT_NEAR(got.compat(c), want.compat[c], 1e-12);
      EXPECT_NEAR(got.conse(c), want.conse[c], 1e-12);
    }
    EXPECT_LE(got.compat.maxCoeff(), 0.0);
    EXPECT_NEAR(got.compat.array().exp().sum(), 1.0, 1e-9);
    EXPECT_LE(got.conse.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Features, ZeroInputAndIdenticalAttributes) {
  hzsl::Rng rng(62);
  auto h = fixtures::random_tree(6, rng);
  auto model = fixtures::random_crf(h, rng);
  model->params().linear.setZero();
  auto zero = hzsl::compute_features(*model, Eigen::VectorXd::Zero(5));
  EXPECT_EQ(zero.linear, Eigen::VectorXd::Zero(6));

  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(6, 4);
  auto attrs = std::make_shared<const hzsl::AttributeTable>(h->symbols(), same);
  hzsl::CrfModel tied(h, attrs, model->head(), model->conse(), model->params());
  auto f = hzsl::compute_features(tied, hzsl::normal_vector(5, 1.0, rng));
  for (int c = 0; c < 6; ++c) {
    EXPECT_NEAR(f.compat(c), -std::log(6.0), 1e-12);
    EXPECT_NEAR(f.conse(c), f.conse(0), 1e-15);
  }
}

TEST(Features, DimensionMismatch) {
  hzsl::Rng rng(63);
  auto model = fixtures::random_crf(fixtures::random_tree(4, rng), rng);
  try {
    hzsl::compute_features(*model, Eigen::VectorXd::Zero(3));
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kDimensionMismatch);
  }
}

TEST(Energies, ZeroWeightsGiveBias) {
  hzsl::Rng rng(64);
  auto h = fixtures::random_tree(8, rng);
  auto model = fixtures::random_crf(h, rng);
  auto& p = model->params();
  p.w_linear.setZero();
  p.w_compat.setZero();
  p.w_conse.setZero();
  p.bias = 2.5;
  auto e = hzsl::path_energies(*h, p, hzsl::compute_features(*model, hzsl::normal_vector(5, 1.0, rng)));
  EXPECT_EQ(e, Eigen::VectorXd::Constant(8, 2.5));
}

TEST(Energies, ChainTelescopes) {
  hzsl::Rng rng(65);
  auto h = fixtures::tree({{"A", "root"}, {"B", "A"}});
  auto model = fixtures::random_crf(h, rng);
  auto f = hzsl::compute_features(*model, hzsl::normal_vector(5, 1.0, rng));
  auto e = hzsl::path_energies(*h, model->params(), f);
  const auto& p = model->params();
  const auto b = h->id("B"), a = h->id("A");
  const double term_b = p.w_linear(b) * f.linear(b) + p.w_compat(b) * f.compat(b) +
                        p.w_conse(b) * f.conse(b);
  EXPECT_NEAR(e(b) - e(a), term_b, 1e-12);
}

TEST(Energies, NaivePathSums) {
  hzsl::Rng rng(66);
  for (int t = 0; t < 20; ++t) {
    auto h = fixtures::random_tree(12, rng);
    auto model = fixtures::random_crf(h, rng);
    Eigen::VectorXd x = hzsl::normal_vector(5, 1.0, rng);
    auto e = hzsl::path_energies(*h, model->params(), hzsl::compute_features(*model, x));
    auto per = oracle::per_class_potentials(model->params(),
                                            oracle::straight_line_features(*model, x));
    auto parent = oracle::parents_of(*h);
    for (int v = 0; v < 12; ++v) {
      double sum = model->params().bias;
      for (int u = v; u >= 0; u = parent[u]) sum += per[u];
      EXPECT_NEAR(e(v), sum, 1e-11);
    }
  }
}

TEST(Distribution, UniformAndShift) {
  auto d = hzsl::path_distribution(Eigen::VectorXd::Constant(7, 3.0));
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(d.prob(i), 1.0 / 7.0, 1e-15);
  hzsl::Rng rng(67);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd e = hzsl::normal_vector(9, 3.0, rng);
    auto a = hzsl::path_distribution(e);
    auto b = hzsl::path_distribution((e.array() + 123.456).matrix());
    EXPECT_NEAR(a.prob.sum(), 1.0, 1e-9);
    EXPECT_LE((a.prob - b.prob).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Distribution, NonFiniteEnergy) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
  e(1) = std::nan("");
  try {
    hzsl::path_distribution(e);
    FAIL();
  } catch (const hzsl::Error& err) {
    EXPECT_EQ(err.code(), hzsl::ErrorCode::kNonFiniteEnergy);
  }
}

TEST(Distribution, FiveNodeEnumeration) {
  hzsl::Rng rng(68);
  auto h = fixtures::tree({{"A", "root"}, {"B", "root"}, {"C", "A"}, {"D", "A"}});
  auto parent = oracle::parents_of(*h);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> per = to_std(hzsl::normal_vector(5, 2.0, rng));
    Eigen::VectorXd energies(5);
    for (int v = 0; v < 5; ++v) {
      energies(v) = 0.7;
      for (int u = v; u >= 0; u = parent[u]) energies(v) += per[u];
    }
    auto got = hzsl::path_distribution(energies);
    auto want = oracle::enumerate_path_distribution(parent, per, 0.7);
    for (int v = 0; v < 5; ++v) EXPECT_NEAR(got.prob(v), want[v], 1e-12);
  }
}

TEST(Distribution, RandomModelsMatchEnumeration) {
  hzsl::Rng rng(69);
  for (int t = 0; t < 30; ++t) {
    auto h = fixtures::random_tree(2 + t % 11, rng);
    auto model = fixtures::random_crf(h, rng);
    Eigen::VectorXd x = hzsl::normal_vector(5, 1.0, rng);
    auto got = hzsl::predict_distribution(*model, x);
    auto per = oracle::per_class_potentials(model->params(),
                                            oracle::straight_line_features(*model, x));
    auto want = oracle::enumerate_path_distribution(oracle::parents_of(*h), per,
                                                    model->params().bias);
    for (std::size_t v = 0; v < h->size(); ++v) EXPECT_NEAR(got.prob(v), want[v], 1e-9);
  }
}

TEST(Nll, UniformIsLogN) {
  hzsl::Rng rng(70);
  auto h = fixtures::random_tree(9, rng);
  auto model = fixtures::random_crf(h, rng);
  auto& p = model->params();
  p.w_linear.setZero();
  p.w_compat.setZero();
  p.w_conse.setZero();
  std::vector<hzsl::Instance> batch{{"a", hzsl::normal_vector(5, 1.0, rng), 3}};
  EXPECT_NEAR(hzsl::nll(*model, batch), std::log(9.0), 1e-12);
}

TEST(Nll, RepeatedExampleAndComposition) {
  hzsl::Rng rng(71);
  auto h = fixtures::random_tree(9, rng);
  auto model = fixtures::random_crf(h, rng);
  hzsl::Instance one{"a", hzsl::normal_vector(5, 1.0, rng), 4};
  std::vector<hzsl::Instance> single{one}, rep(5, one);
  EXPECT_NEAR(hzsl::nll(*model, rep), hzsl::nll(*model, single), 1e-12);

  std::vector<hzsl::Instance> batch;
  double want = 0.0;
  for (int i = 0; i < 6; ++i) {
    batch.push_back({"b", hzsl::normal_vector(5, 1.0, rng), static_cast<LabelId>(i)});
    want -= std::log(hzsl::predict_distribution(*model, batch.back().features).prob(i));
  }
  EXPECT_NEAR(hzsl::nll(*model, batch), want / 6.0, 1e-12);
}

TEST(Nll, UnknownLabel) {
  hzsl::Rng rng(72);
  auto model = fixtures::random_crf(fixtures::random_tree(4, rng), rng);
  std::vector<hzsl::Instance> batch{{"a", Eigen::VectorXd::Zero(5), 9}};
  try {
    hzsl::nll(*model, batch);
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kUnknownLabel);
  }
}

TEST(Train, LearningRateZeroAndDeterminism) {
  hzsl::Rng rng(73);
  auto h = fixtures::random_tree(7, rng);
  auto model = fixtures::random_crf(h, rng, 0.3);
  std::vector<hzsl::Instance> data;
  for (int i = 0; i < 40; ++i) {
    data.push_back({"x", hzsl::normal_vector(5, 1.0, rng), static_cast<LabelId>(1 + i % 6)});
  }
  hzsl::TrainConfig frozen{0.0, 3, 8, 1};
  auto r0 = hzsl::train_crf(*model, data, frozen);
  EXPECT_EQ(r0.model.params(), model->params());

  hzsl::TrainConfig cfg{0.05, 5, 8, 1};
  auto a = hzsl::train_crf(*model, data, cfg);
  auto b = hzsl::train_crf(*model, data, cfg);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_EQ(a.model.params(), b.model.params());
  EXPECT_EQ(a.model.head(), model->head());
}

TEST(Train, SeparableDataReducesLoss) {
  hzsl::Rng rng(74);
  auto h = fixtures::random_tree(7, rng);
  auto model = fixtures::random_crf(h, rng, 0.1);
  // Each label owns a random direction in feature space.
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < 7; ++c) centers.push_back(hzsl::normal_vector(5, 3.0, rng));
  std::vector<hzsl::Instance> data;
  for (int i = 0; i < 70; ++i) {
    const LabelId y = i % 7;
    data.push_back({"x", centers[y] + hzsl::normal_vector(5, 0.3, rng), y});
  }
  auto r = hzsl::train_crf(*model, data, hzsl::TrainConfig{0.05, 20, 10, 2});
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
  EXPECT_NEAR(r.loss_trace.back(), hzsl::nll(r.model, data), 1e-12);
}

TEST(SubtreeMass, RootLeafAndRecursion) {
  hzsl::Rng rng(75);
  for (int t = 0; t < 20; ++t) {
    auto h = fixtures::random_tree(11, rng);
    auto d = random_distribution(11, rng);
    auto masses = hzsl::subtree_masses(*h, d);
    EXPECT_NEAR(hzsl::subtree_mass(*h, d, h->root()), 1.0, 1e-12);
    for (LabelId v = 0; v < 11; ++v) {
      double want = d.prob(v);
      double max_child = 0.0;
      for (auto c : h->children(v)) {
        want += masses(c);
        max_child = std::max(max_child, masses(c));
      }
      EXPECT_NEAR(masses(v), want, 1e-12);
      EXPECT_GE(masses(v), max_child);
      if (h->is_leaf(v)) {
        EXPECT_EQ(masses(v), d.prob(v));
      }
      EXPECT_EQ(hzsl::subtree_mass(*h, d, v), masses(v));
    }
  }
}

TEST(Predict, FreeTieAndScan) {
  auto uniform = hzsl::path_distribution(Eigen::VectorXd::Zero(6));
  EXPECT_EQ(hzsl::predict_free(uniform), 0);
  Eigen::VectorXd e = Eigen::VectorXd::Constant(6, 50.0);
  e(4) = -50.0;
  EXPECT_EQ(hzsl::predict_free(hzsl::path_distribution(e)), 4);
  hzsl::Rng rng(76);
  std::vector<LabelId> all{0, 1, 2, 3, 4, 5, 6, 7};
  for (int t = 0; t < 30; ++t) {
    auto d = random_distribution(8, rng);
    EXPECT_EQ(hzsl::predict_free(d), scan_argmax(to_std(d.prob), all));
  }
}

TEST(Predict, WithinLevel) {
  hzsl::Rng rng(77);
  for (int t = 0; t < 30; ++t) {
    auto h = fixtures::random_tree(12, rng);
    auto d = random_distribution(12, rng);
    EXPECT_EQ(hzsl::predict_within_level(*h, d, 0), h->root());
    auto parent = oracle::parents_of(*h);
    for (int l = 1; l <= h->max_depth(); ++l) {
      std::vector<double> mass(12, 0.0);
      for (int v = 0; v < 12; ++v) {
        for (int u = v; u >= 0; u = parent[u]) mass[u] += d.prob(v);
      }
      std::vector<LabelId> level;
      for (int v = 0; v < 12; ++v) {
        if (oracle::depth_by_walk(parent, v) == l) level.push_back(v);
      }
      EXPECT_EQ(hzsl::predict_within_level(*h, d, l), scan_argmax(mass, level));
    }
    try {
      hzsl::predict_within_level(*h, d, h->max_depth() + 1);
      FAIL();
    } catch (const hzsl::Error& e) {
      EXPECT_EQ(e.code(), hzsl::ErrorCode::kEmptyLevel);
    }
  }
  auto h = fixtures::tree({{"A", "root"}, {"B", "root"}, {"C", "A"}, {"D", "B"}});
  Eigen::VectorXd e = Eigen::VectorXd::Constant(5, 60.0);
  e(h->id("D")) = -60.0;
  EXPECT_EQ(hzsl::predict_within_level(*h, hzsl::path_distribution(e), 1), h->id("B"));
}

TEST(Predict, Restricted) {
  hzsl::Rng rng(78);
  std::vector<LabelId> all{0, 1, 2, 3, 4, 5, 6};
  for (int t = 0; t < 30; ++t) {
    auto d = random_distribution(7, rng);
    EXPECT_EQ(hzsl::predict_restricted(d, all), hzsl::predict_free(d));
    std::vector<LabelId> single{static_cast<LabelId>(t % 7)};
    EXPECT_EQ(hzsl::predict_restricted(d, single), t % 7);
    std::vector<LabelId> some{1, 3, 6};
    EXPECT_EQ(hzsl::predict_restricted(d, some), scan_argmax(to_std(d.prob), some));
  }
  auto d = random_distribution(3, rng);
  try {
    hzsl::predict_restricted(d, {});
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kEmptyCandidates);
  }
}

TEST(Predict, MaxUtilityBasics) {
  auto h = fixtures::tree({{"A", "root"}, {"B", "root"}, {"C", "A"}, {"D", "A"}});
  Eigen::VectorXd e = Eigen::VectorXd::Constant(5, 400.0);
  e(h->id("C")) = -400.0;
  auto point = hzsl::path_distribution(e);
  hzsl::UtilitySpec usd(hzsl::UtilityKind::kSubtreeDepth, *h);
  auto r = hzsl::predict_max_utility(point, usd);
  EXPECT_EQ(r.node, h->id("C"));
  EXPECT_EQ(r.expected_utility, 1.0);
  hzsl::UtilitySpec exact(hzsl::UtilityKind::kExactMatch, *h);
  auto u = hzsl::predict_max_utility(hzsl::path_distribution(Eigen::VectorXd::Zero(5)), exact);
  EXPECT_EQ(u.node, 0);
  hzsl::Rng rng(79);
  for (int t = 0; t < 20; ++t) {
    auto d = random_distribution(5, rng);
    EXPECT_EQ(hzsl::predict_max_utility(d, exact).node, hzsl::predict_free(d));
  }
}

TEST(Checkpoint, CrfRoundTripAndFingerprint) {
  hzsl::Rng rng(80);
  auto h = fixtures::random_tree(8, rng);
  auto model = fixtures::random_crf(h, rng);
  auto ckpt = model->to_checkpoint();
  std::ostringstream out;
  hzsl::write_checkpoint(out, ckpt);
  std::istringstream in(out.str());
  auto back = hzsl::CrfModel::from_checkpoint(hzsl::read_checkpoint(in, "mem"), h,
                                              model->attributes_ptr());
  EXPECT_EQ(back.params(), model->params());
  EXPECT_EQ(back.head(), model->head());
  EXPECT_EQ(back.conse().m, model->conse().m);
  EXPECT_EQ(back.to_checkpoint(), ckpt);

  auto other = fixtures::random_tree(8, rng);
  ASSERT_NE(other->fingerprint(), h->fingerprint());
  try {
    hzsl::CrfModel::from_checkpoint(ckpt, other, model->attributes_ptr());
    FAIL();
  } catch (const hzsl::Error& e) {
    EXPECT_EQ(e.code(), hzsl::ErrorCode::kFingerprintMismatch);
  }
}

TEST(Complexity, EnergiesAndDistributionScaleLinearly) {
  hzsl::Rng rng(81);
  std::vector<double> secs;
  const std::vector<int> sizes{100, 1000, 10000};
  for (int n : sizes) {
    auto h = fixtures::random_tree(n, rng);
    hzsl::CrfParameters p;
    p.w_linear = hzsl::normal_vector(n, 1.0, rng);
    p.w_compat = hzsl::normal_vector(n, 1.0, rng);
    p.w_conse = hzsl::normal_vector(n, 1.0, rng);
    hzsl::ClassFeatureBundle f{hzsl::normal_vector(n, 1.0, rng),
                               hzsl::normal_vector(n, 1.0, rng),
                               hzsl::normal_vector(n, 1.0, rng)};
    const int reps = 2000000 / n;
    double best = 1e9;
    for (int trial = 0; trial < 5; ++trial) {
      auto start = std::chrono::steady_clock::now();
      double sink = 0.0;
      for (int r = 0; r < reps; ++r) {
        sink += hzsl::path_distribution(hzsl::path_energies(*h, p, f)).prob(0);
      }
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      EXPECT_GT(sink, 0.0);
      best = std::min(best, s / reps);
    }
    secs.push_back(best);
  }
  // Per-node cost at N=10000 stays within 3x of the per-node cost at N=1000.
  const double per_node_1k = secs[1] / 1000.0;
  const double per_node_10k = secs[2] / 10000.0;
  EXPECT_LE(per_node_10k, 3.0 * per_node_1k);
  EXPECT_LE(secs[2] / 100.0, 3.0 * std::max(secs[0], per_node_1k * 100.0));
}
