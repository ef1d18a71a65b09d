#include "core/crf.hpp"

#include <cmath>
#include <numeric>

#include "core/error.hpp"
#include "core/random.hpp"
#include "core/sgd.hpp"
#include "core/text.hpp"
#include "core/utility.hpp"

namespace hzsl {

// ---------------------------------------------------------------------------
// CrfParameters

CrfParameters CrfParameters::zeros_like() const {
  CrfParameters z;
  z.w_linear = Eigen::VectorXd::Zero(w_linear.size());
  z.w_compat = Eigen::VectorXd::Zero(w_compat.size());
  z.w_conse = Eigen::VectorXd::Zero(w_conse.size());
  z.bias = 0.0;
  z.linear = Eigen::MatrixXd::Zero(linear.rows(), linear.cols());
  z.compat = CompatModel(
      Eigen::MatrixXd::Zero(compat.w1().rows(), compat.w1().cols()),
      Eigen::MatrixXd::Zero(compat.w2().rows(), compat.w2().cols()));
  return z;
}

double CrfParameters::squared_norm() const {
  return w_linear.squaredNorm() + w_compat.squaredNorm() +
         w_conse.squaredNorm() + bias * bias + linear.squaredNorm() +
         compat.w1().squaredNorm() + compat.w2().squaredNorm();
}

void CrfParameters::add_scaled(const CrfParameters& other, double scale) {
  w_linear += scale * other.w_linear;
  w_compat += scale * other.w_compat;
  w_conse += scale * other.w_conse;
  bias += scale * other.bias;
  linear += scale * other.linear;
  compat.w1() += scale * other.compat.w1();
  compat.w2() += scale * other.compat.w2();
}

bool operator==(const CrfParameters& a, const CrfParameters& b) {
  auto same = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  return same(a.w_linear, b.w_linear) && same(a.w_compat, b.w_compat) &&
         same(a.w_conse, b.w_conse) && a.bias == b.bias &&
         same(a.linear, b.linear) && a.compat == b.compat;
}

// ---------------------------------------------------------------------------
// CrfModel

CrfModel::CrfModel(std::shared_ptr<const LabelHierarchy> hierarchy,
                   std::shared_ptr<const AttributeTable> attributes,
                   SoftmaxHead head, ConseConfig conse, CrfParameters params)
    : hierarchy_(std::move(hierarchy)),
      attributes_(std::move(attributes)),
      head_(std::move(head)),
      conse_(conse),
      params_(std::move(params)) {
  all_nodes_.resize(hierarchy_->size());
  std::iota(all_nodes_.begin(), all_nodes_.end(), LabelId{0});
  check_shapes();
}

void CrfModel::check_shapes() const {
  const auto n = static_cast<Eigen::Index>(hierarchy_->size());
  if (attributes_->symbols().labels() != hierarchy_->symbols().labels()) {
    fail(ErrorCode::kCrossFileInconsistency,
         "attribute table labels differ from the hierarchy labels");
  }
  const auto& p = params_;
  if (p.w_linear.size() != n || p.w_compat.size() != n ||
      p.w_conse.size() != n || p.linear.rows() != n) {
    fail(ErrorCode::kDimensionMismatch,
         "CRF weights must have one entry per hierarchy node");
  }
  if (p.linear.cols() != head_.feature_dim() ||
      p.compat.feature_dim() != head_.feature_dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "CRF, head and compat feature dimensions disagree");
  }
  if (p.compat.embed_dim() != attributes_->dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "compat output dimension differs from attribute dimension");
  }
  for (LabelId c : head_.classes()) {
    if (!hierarchy_->contains(c)) {
      fail(ErrorCode::kUnknownLabel, "head class id outside the hierarchy");
    }
  }
  if (conse_.m < 1 ||
      conse_.m > static_cast<int>(head_.classes().size())) {
    fail(ErrorCode::kConfigInvalid,
         "ConSE m must lie in [1, number of training classes]");
  }
}

CrfModel CrfModel::initialize(std::shared_ptr<const LabelHierarchy> hierarchy,
                              std::shared_ptr<const AttributeTable> attributes,
                              SoftmaxHead head, CompatModel compat,
                              ConseConfig conse, const CrfInit& init) {
  const auto n = static_cast<Eigen::Index>(hierarchy->size());
  const int d = head.feature_dim();
  Rng rng(init.seed);
  CrfParameters p;
  p.w_linear = Eigen::VectorXd::Constant(n, init.w_linear);
  p.w_compat = Eigen::VectorXd::Constant(n, init.w_compat);
  p.w_conse = Eigen::VectorXd::Constant(n, init.w_conse);
  p.bias = 0.0;
  p.linear = uniform_matrix(n, d, 1.0 / std::sqrt(d), rng);
  p.compat = std::move(compat);
  return CrfModel(std::move(hierarchy), std::move(attributes), std::move(head),
                  conse, std::move(p));
}

Eigen::VectorXd CrfModel::conse_features(const Eigen::VectorXd& h) const {
  const auto eps =
      conse_embed(head_.probabilities(h), head_.classes(), *attributes_, conse_);
  const double eps_norm = eps.norm();
  if (eps_norm == 0.0) {
    fail(ErrorCode::kZeroVector, "ConSE embedding is the zero vector");
  }
  Eigen::VectorXd out = (attributes_->matrix() * eps).array() /
                        (attributes_->norms().array() * eps_norm);
  return out.cwiseMax(-1.0).cwiseMin(1.0);
}

Checkpoint CrfModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "crf";
  ckpt.meta["hierarchy"] = text::hex64(hierarchy_->fingerprint());
  ckpt.meta["conse.m"] = std::to_string(conse_.m);
  auto head_ckpt = head_.to_checkpoint(hierarchy_->fingerprint());
  ckpt.meta["head.classes"] = head_ckpt.get_meta("classes");
  ckpt.put("head.weights", head_.weights());
  ckpt.put("head.bias", head_.bias());
  ckpt.put("w_linear", params_.w_linear);
  ckpt.put("w_compat", params_.w_compat);
  ckpt.put("w_conse", params_.w_conse);
  ckpt.put_scalar("bias", params_.bias);
  ckpt.put("linear", params_.linear);
  ckpt.put("w1", params_.compat.w1());
  ckpt.put("w2", params_.compat.w2());
  return ckpt;
}

CrfModel CrfModel::from_checkpoint(
    const Checkpoint& ckpt, std::shared_ptr<const LabelHierarchy> hierarchy,
    std::shared_ptr<const AttributeTable> attributes) {
  if (ckpt.kind != "crf") {
    fail(ErrorCode::kParse, "expected a crf checkpoint, got '" + ckpt.kind + "'");
  }
  const auto fp = hierarchy->fingerprint();
  auto head = SoftmaxHead::from_checkpoint(ckpt, fp);
  auto m = text::parse_int(ckpt.get_meta("conse.m"));
  if (!m) fail(ErrorCode::kParse, "bad conse.m in checkpoint");
  CrfParameters p;
  p.w_linear = ckpt.vector("w_linear");
  p.w_compat = ckpt.vector("w_compat");
  p.w_conse = ckpt.vector("w_conse");
  p.bias = ckpt.scalar("bias");
  p.linear = ckpt.matrix("linear");
  p.compat = CompatModel::from_checkpoint(ckpt, fp);
  return CrfModel(std::move(hierarchy), std::move(attributes), std::move(head),
                  ConseConfig{static_cast<int>(*m)}, std::move(p));
}

// ---------------------------------------------------------------------------
// Inference

namespace {

struct CompatPass {
  CompatModel::Forward fwd;
  Eigen::VectorXd softmax;  // exp(fD)
};

ClassFeatureBundle features_with_cache(const CrfModel& model,
                                       const Eigen::VectorXd& h,
                                       const Eigen::VectorXd& conse,
                                       CompatPass* pass) {
  if (h.size() != model.feature_dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "feature vector has dimension " + std::to_string(h.size()) +
             ", model expects " + std::to_string(model.feature_dim()));
  }
  const auto& p = model.params();
  ClassFeatureBundle b;
  b.linear = p.linear * h;
  auto fwd = p.compat.forward(h);
  b.compat = log_softmax(model.attributes().matrix() * fwd.embedding);
  b.conse = conse;
  if (pass) {
    pass->softmax = b.compat.array().exp();
    pass->fwd = std::move(fwd);
  }
  return b;
}

}  // namespace

ClassFeatureBundle compute_features(const CrfModel& model,
                                    const Eigen::VectorXd& h) {
  if (h.size() != model.feature_dim()) {
    fail(ErrorCode::kDimensionMismatch,
         "feature vector has dimension " + std::to_string(h.size()) +
             ", model expects " + std::to_string(model.feature_dim()));
  }
  return features_with_cache(model, h, model.conse_features(h), nullptr);
}

Eigen::VectorXd path_energies(const LabelHierarchy& h,
                              const CrfParameters& params,
                              const ClassFeatureBundle& bundle) {
  const auto n = static_cast<Eigen::Index>(h.size());
  if (bundle.linear.size() != n || bundle.compat.size() != n ||
      bundle.conse.size() != n) {
    fail(ErrorCode::kDimensionMismatch, "feature bundle does not match tree");
  }
  const Eigen::VectorXd per_class =
      params.w_linear.cwiseProduct(bundle.linear) +
      params.w_compat.cwiseProduct(bundle.compat) +
      params.w_conse.cwiseProduct(bundle.conse);
  Eigen::VectorXd energy(n);
  for (LabelId v : h.topological_order()) {
    const LabelId parent = h.parent(v);
    energy(v) = per_class(v) + (parent == kNoLabel ? params.bias : energy(parent));
  }
  return energy;
}

PathDistribution path_distribution(const Eigen::VectorXd& energies) {
  if (energies.size() == 0) {
    fail(ErrorCode::kInvalidArgument, "no paths");
  }
  if (!energies.allFinite()) {
    fail(ErrorCode::kNonFiniteEnergy, "path energy is not finite");
  }
  PathDistribution d;
  d.log_prob = log_softmax(-energies);
  d.prob = d.log_prob.array().exp();
  return d;
}

PathDistribution predict_distribution(const CrfModel& model,
                                      const Eigen::VectorXd& h) {
  return path_distribution(path_energies(model.hierarchy(), model.params(),
                                         compute_features(model, h)));
}

// ---------------------------------------------------------------------------
// Learning

namespace {

void check_label(const CrfModel& model, const Instance& inst) {
  if (!model.hierarchy().contains(inst.label)) {
    fail(ErrorCode::kUnknownLabel,
         "instance '" + inst.id + "' has a label outside the hierarchy");
  }
}

double instance_nll(const CrfModel& model, const Instance& inst,
                    const Eigen::VectorXd& conse) {
  check_label(model, inst);
  auto bundle = features_with_cache(model, inst.features, conse, nullptr);
  auto dist = path_distribution(
      path_energies(model.hierarchy(), model.params(), bundle));
  return -dist.log_prob(inst.label);
}

// Adds d(-log p(label | x))/d(params) to `grad`.
void accumulate_gradient(const CrfModel& model, const Instance& inst,
                         const Eigen::VectorXd& conse, CrfParameters& grad) {
  check_label(model, inst);
  const auto& h = model.hierarchy();
  const auto& p = model.params();
  CompatPass pass;
  auto bundle = features_with_cache(model, inst.features, conse, &pass);
  auto dist = path_distribution(path_energies(h, p, bundle));

  // dL/dE(v) = [v == label] - p(v); the per-class term of c collects this
  // over every path through c, i.e. [c on path(label)] - subtree mass of c.
  Eigen::VectorXd g = -subtree_masses(h, dist);
  for (LabelId c : h.path(inst.label)) g(c) += 1.0;

  grad.bias += 1.0 - dist.prob.sum();
  grad.w_linear += g.cwiseProduct(bundle.linear);
  grad.w_compat += g.cwiseProduct(bundle.compat);
  grad.w_conse += g.cwiseProduct(bundle.conse);

  const Eigen::VectorXd d_linear = g.cwiseProduct(p.w_linear);
  grad.linear.noalias() += d_linear * inst.features.transpose();

  // Back through fD = log-softmax(A z).
  const Eigen::VectorXd d_log = g.cwiseProduct(p.w_compat);
  const Eigen::VectorXd d_scores = d_log - pass.softmax * d_log.sum();
  const Eigen::VectorXd d_embedding =
      model.attributes().matrix().transpose() * d_scores;
  p.compat.backward(pass.fwd, inst.features, d_embedding, grad.compat.w1(),
                    grad.compat.w2());
}

}  // namespace

double nll(const CrfModel& model, std::span<const Instance> batch) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  double total = 0.0;
  for (const auto& inst : batch) {
    total += instance_nll(model, inst, model.conse_features(inst.features));
  }
  return total / static_cast<double>(batch.size());
}

CrfParameters nll_gradient(const CrfModel& model,
                           std::span<const Instance> batch) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  auto grad = model.params().zeros_like();
  for (const auto& inst : batch) {
    accumulate_gradient(model, inst, model.conse_features(inst.features), grad);
  }
  auto scaled = grad.zeros_like();
  scaled.add_scaled(grad, 1.0 / static_cast<double>(batch.size()));
  return scaled;
}

CrfTrainResult train_crf(CrfModel model, std::span<const Instance> train,
                         const TrainConfig& config) {
  validate(config);
  if (train.empty()) fail(ErrorCode::kEmptyDataset, "no training instances");
  // ConSE features only depend on frozen components.
  std::vector<Eigen::VectorXd> conse(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    check_label(model, train[i]);
    conse[i] = model.conse_features(train[i].features);
  }

  auto full_loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      total += instance_nll(model, train[i], conse[i]);
    }
    return total / static_cast<double>(train.size());
  };
  auto trace = run_minibatch_sgd(
      train.size(), config, full_loss,
      [&](std::span<const std::size_t> batch, double lr) {
        auto grad = model.params().zeros_like();
        for (std::size_t i : batch) {
          accumulate_gradient(model, train[i], conse[i], grad);
        }
        double scale = 1.0 / static_cast<double>(batch.size());
        if (config.clip_norm > 0.0) {
          const double norm = std::sqrt(grad.squared_norm()) * scale;
          if (norm > config.clip_norm) scale *= config.clip_norm / norm;
        }
        model.params().add_scaled(grad, -lr * scale);
      });
  return {std::move(model), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Prediction

Eigen::VectorXd subtree_masses(const LabelHierarchy& h,
                               const PathDistribution& dist) {
  if (static_cast<std::size_t>(dist.prob.size()) != h.size()) {
    fail(ErrorCode::kDimensionMismatch, "distribution does not match tree");
  }
  Eigen::VectorXd mass = dist.prob;
  const auto& order = h.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const LabelId parent = h.parent(*it);
    if (parent != kNoLabel) mass(parent) += mass(*it);
  }
  return mass;
}

double subtree_mass(const LabelHierarchy& h, const PathDistribution& dist,
                    LabelId node) {
  if (!h.contains(node)) fail(ErrorCode::kUnknownLabel, "node out of range");
  return subtree_masses(h, dist)(node);
}

LabelId predict_free(const PathDistribution& dist) {
  Eigen::Index best = 0;
  dist.prob.maxCoeff(&best);  // first maximum, i.e. smallest id
  return static_cast<LabelId>(best);
}

LabelId predict_within_level(const LabelHierarchy& h,
                             const PathDistribution& dist, int level) {
  const auto nodes = h.nodes_at_level(level);
  if (nodes.empty()) {
    fail(ErrorCode::kEmptyLevel,
         "no nodes at level " + std::to_string(level));
  }
  const auto mass = subtree_masses(h, dist);
  Eigen::VectorXd scores(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) scores(i) = mass(nodes[i]);
  return nodes[argmax_by_label(nodes, scores)];
}

LabelId predict_restricted(const PathDistribution& dist,
                           std::span<const LabelId> candidates) {
  if (candidates.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  Eigen::VectorXd scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 0 || candidates[i] >= dist.prob.size()) {
      fail(ErrorCode::kUnknownLabel, "candidate outside the distribution");
    }
    scores(i) = dist.prob(candidates[i]);
  }
  return candidates[argmax_by_label(candidates, scores)];
}

UtilityPrediction predict_max_utility(const PathDistribution& dist,
                                      const UtilitySpec& utility) {
  const auto eu = expected_utilities(dist, utility);
  Eigen::Index best = 0;
  eu.maxCoeff(&best);
  return {static_cast<LabelId>(best), eu(best)};
}

}  // namespace hzsl
