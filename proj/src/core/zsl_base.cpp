#include "core/zsl_base.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/random.hpp"
#include "core/sgd.hpp"
#include "core/text.hpp"

namespace hzsl {

void validate(const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    fail(ErrorCode::kConfigInvalid, "learning_rate must be finite and >= 0");
  }
  if (config.epochs < 0) fail(ErrorCode::kConfigInvalid, "epochs must be >= 0");
  if (config.batch_size < 1) {
    fail(ErrorCode::kConfigInvalid, "batch_size must be >= 1");
  }
  if (!(config.lr_decay > 0.0) || config.decay_every < 0) {
    fail(ErrorCode::kConfigInvalid, "lr_decay must be > 0, decay_every >= 0");
  }
  if (!(config.clip_norm >= 0.0) || !std::isfinite(config.clip_norm)) {
    fail(ErrorCode::kConfigInvalid, "clip_norm must be finite and >= 0");
  }
}

double log_sum_exp(const Eigen::VectorXd& scores) {
  const double top = scores.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((scores.array() - top).exp().sum());
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& scores) {
  return scores.array() - log_sum_exp(scores);
}

std::size_t argmax_by_label(std::span<const LabelId> labels,
                            const Eigen::VectorXd& scores) {
  if (labels.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (scores(i) > scores(best) ||
        (scores(i) == scores(best) && labels[i] < labels[best])) {
      best = i;
    }
  }
  return best;
}

namespace {

std::string fingerprint_hex(std::uint64_t fp) { return text::hex64(fp); }

void check_fingerprint(const Checkpoint& ckpt, std::uint64_t fingerprint) {
  const auto& stored = ckpt.get_meta("hierarchy");
  if (stored != fingerprint_hex(fingerprint)) {
    fail(ErrorCode::kFingerprintMismatch,
         "checkpoint was trained on hierarchy " + stored +
             ", current hierarchy is " + fingerprint_hex(fingerprint));
  }
}

void check_dims(std::span<const Instance> data, int dim) {
  for (const auto& inst : data) {
    if (inst.features.size() != dim) {
      fail(ErrorCode::kDimensionMismatch,
           "instance '" + inst.id + "' has " +
               std::to_string(inst.features.size()) + " features, expected " +
               std::to_string(dim));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// SoftmaxHead

SoftmaxHead::SoftmaxHead(std::vector<LabelId> classes, Eigen::MatrixXd weights,
                         Eigen::VectorXd bias)
    : classes_(std::move(classes)),
      weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (classes_.empty()) fail(ErrorCode::kEmptyDataset, "head has no classes");
  if (!std::is_sorted(classes_.begin(), classes_.end()) ||
      std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    fail(ErrorCode::kInvalidArgument, "head classes must be strictly ascending");
  }
  if (weights_.rows() != static_cast<Eigen::Index>(classes_.size()) ||
      bias_.size() != weights_.rows()) {
    fail(ErrorCode::kDimensionMismatch, "head weight shapes disagree");
  }
}

SoftmaxHead SoftmaxHead::initialize(std::vector<LabelId> classes,
                                    int feature_dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto k = static_cast<Eigen::Index>(classes.size());
  auto w = uniform_matrix(k, feature_dim, 1.0 / std::sqrt(feature_dim), rng);
  return SoftmaxHead(std::move(classes), std::move(w), Eigen::VectorXd::Zero(k));
}

Eigen::VectorXd SoftmaxHead::logits(const Eigen::VectorXd& h) const {
  if (h.size() != weights_.cols()) {
    fail(ErrorCode::kDimensionMismatch, "feature dimension mismatch");
  }
  return weights_ * h + bias_;
}

Eigen::VectorXd SoftmaxHead::probabilities(const Eigen::VectorXd& h) const {
  return log_softmax(logits(h)).array().exp();
}

Checkpoint SoftmaxHead::to_checkpoint(std::uint64_t fingerprint) const {
  Checkpoint ckpt;
  ckpt.kind = "softmax-head";
  ckpt.meta["hierarchy"] = fingerprint_hex(fingerprint);
  std::string ids;
  for (LabelId c : classes_) ids += (ids.empty() ? "" : " ") + std::to_string(c);
  ckpt.meta["classes"] = ids;
  ckpt.put("weights", weights_);
  ckpt.put("bias", bias_);
  return ckpt;
}

SoftmaxHead SoftmaxHead::from_checkpoint(const Checkpoint& ckpt,
                                         std::uint64_t fingerprint) {
  if (ckpt.kind != "softmax-head" && ckpt.kind != "crf") {
    fail(ErrorCode::kParse, "checkpoint kind '" + ckpt.kind +
                                "' does not contain a softmax head");
  }
  check_fingerprint(ckpt, fingerprint);
  const std::string prefix = ckpt.kind == "crf" ? "head." : "";
  std::vector<LabelId> classes;
  for (auto tok : text::split_ws(ckpt.get_meta(prefix + "classes"))) {
    auto v = text::parse_int(tok);
    if (!v) fail(ErrorCode::kParse, "bad class id in checkpoint");
    classes.push_back(static_cast<LabelId>(*v));
  }
  return SoftmaxHead(std::move(classes), ckpt.matrix(prefix + "weights"),
                     ckpt.vector(prefix + "bias"));
}

double softmax_head_loss(const SoftmaxHead& head,
                         std::span<const Instance> batch) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  double total = 0.0;
  for (const auto& inst : batch) {
    auto it = std::lower_bound(head.classes().begin(), head.classes().end(),
                               inst.label);
    if (it == head.classes().end() || *it != inst.label) {
      fail(ErrorCode::kLabelOutsideTrainSet,
           "instance '" + inst.id + "' is not labeled with a training class");
    }
    auto lp = log_softmax(head.logits(inst.features));
    total -= lp(it - head.classes().begin());
  }
  return total / static_cast<double>(batch.size());
}

HeadTrainResult train_softmax_head(std::span<const Instance> train,
                                   std::vector<LabelId> classes,
                                   const TrainConfig& config) {
  validate(config);
  if (train.empty()) fail(ErrorCode::kEmptyDataset, "no training instances");
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const int dim = static_cast<int>(train.front().features.size());
  check_dims(train, dim);

  std::vector<Eigen::Index> target(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto it = std::lower_bound(classes.begin(), classes.end(), train[i].label);
    if (it == classes.end() || *it != train[i].label) {
      fail(ErrorCode::kLabelOutsideTrainSet,
           "instance '" + train[i].id + "' has label " +
               std::to_string(train[i].label) + " outside the training classes");
    }
    target[i] = it - classes.begin();
  }

  HeadTrainResult result{SoftmaxHead::initialize(classes, dim, config.seed), {}};
  Eigen::MatrixXd w = result.head.weights();
  Eigen::VectorXd b = result.head.bias();

  result.loss_trace = run_minibatch_sgd(
      train.size(), config,
      [&] {
        result.head = SoftmaxHead(classes, w, b);
        return softmax_head_loss(result.head, train);
      },
      [&](std::span<const std::size_t> batch, double lr) {
        Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(w.rows(), w.cols());
        Eigen::VectorXd gb = Eigen::VectorXd::Zero(b.size());
        for (std::size_t i : batch) {
          const auto& h = train[i].features;
          Eigen::VectorXd p = log_softmax(w * h + b).array().exp();
          p(target[i]) -= 1.0;
          gw.noalias() += p * h.transpose();
          gb += p;
        }
        const double scale = lr / static_cast<double>(batch.size());
        w -= scale * gw;
        b -= scale * gb;
      });
  result.head = SoftmaxHead(std::move(classes), std::move(w), std::move(b));
  return result;
}

// ---------------------------------------------------------------------------
// CompatModel

CompatModel::CompatModel(Eigen::MatrixXd w1, Eigen::MatrixXd w2)
    : w1_(std::move(w1)), w2_(std::move(w2)) {
  if (w2_.cols() != w1_.rows()) {
    fail(ErrorCode::kDimensionMismatch,
         "W2 has " + std::to_string(w2_.cols()) + " columns, W1 has " +
             std::to_string(w1_.rows()) + " rows");
  }
}

CompatModel CompatModel::initialize(int feature_dim, int hidden_dim,
                                    int embed_dim, std::uint64_t seed) {
  if (feature_dim < 1 || hidden_dim < 1 || embed_dim < 1) {
    fail(ErrorCode::kConfigInvalid, "compat dimensions must be positive");
  }
  Rng rng(seed);
  auto w1 = uniform_matrix(hidden_dim, feature_dim,
                           1.0 / std::sqrt(feature_dim), rng);
  auto w2 =
      uniform_matrix(embed_dim, hidden_dim, 1.0 / std::sqrt(hidden_dim), rng);
  return CompatModel(std::move(w1), std::move(w2));
}

CompatModel::Forward CompatModel::forward(const Eigen::VectorXd& h) const {
  if (h.size() != w1_.cols()) {
    fail(ErrorCode::kDimensionMismatch,
         "compat model expects " + std::to_string(w1_.cols()) +
             " features, got " + std::to_string(h.size()));
  }
  Forward f;
  f.hidden_pre = w1_ * h;
  f.hidden = f.hidden_pre.cwiseMax(0.0);
  f.out_pre = w2_ * f.hidden;
  f.embedding = f.out_pre.cwiseMax(0.0);
  return f;
}

void CompatModel::backward(const Forward& fwd, const Eigen::VectorXd& h,
                           const Eigen::VectorXd& d_embedding,
                           Eigen::MatrixXd& grad_w1,
                           Eigen::MatrixXd& grad_w2) const {
  Eigen::VectorXd d_out =
      (fwd.out_pre.array() > 0.0).select(d_embedding, 0.0);
  grad_w2.noalias() += d_out * fwd.hidden.transpose();
  Eigen::VectorXd d_hidden = w2_.transpose() * d_out;
  d_hidden = (fwd.hidden_pre.array() > 0.0).select(d_hidden, 0.0);
  grad_w1.noalias() += d_hidden * h.transpose();
}

Checkpoint CompatModel::to_checkpoint(std::uint64_t fingerprint) const {
  Checkpoint ckpt;
  ckpt.kind = "compat";
  ckpt.meta["hierarchy"] = fingerprint_hex(fingerprint);
  ckpt.put("w1", w1_);
  ckpt.put("w2", w2_);
  return ckpt;
}

CompatModel CompatModel::from_checkpoint(const Checkpoint& ckpt,
                                         std::uint64_t fingerprint) {
  if (ckpt.kind != "compat" && ckpt.kind != "crf") {
    fail(ErrorCode::kParse, "checkpoint kind '" + ckpt.kind +
                                "' does not contain a compatibility model");
  }
  check_fingerprint(ckpt, fingerprint);
  return CompatModel(ckpt.matrix("w1"), ckpt.matrix("w2"));
}

Eigen::VectorXd compat_raw_scores(const Eigen::VectorXd& embedding,
                                  const AttributeTable& attrs,
                                  std::span<const LabelId> candidates) {
  if (candidates.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  if (attrs.dim() != embedding.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "attribute dimension " + std::to_string(attrs.dim()) +
             " does not match embedding dimension " +
             std::to_string(embedding.size()));
  }
  Eigen::VectorXd scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const LabelId c = candidates[i];
    if (c < 0 || static_cast<std::size_t>(c) >= attrs.size()) {
      fail(ErrorCode::kMissingAttribute,
           "no attribute vector for label id " + std::to_string(c));
    }
    scores(i) = attrs.matrix().row(c).dot(embedding);
  }
  return scores;
}

Eigen::VectorXd compat_log_scores(const CompatModel& model,
                                  const Eigen::VectorXd& h,
                                  const AttributeTable& attrs,
                                  std::span<const LabelId> candidates) {
  return log_softmax(compat_raw_scores(model.embed(h), attrs, candidates));
}

namespace {

Eigen::Index candidate_index(std::span<const LabelId> candidates,
                             const Instance& inst) {
  auto it = std::find(candidates.begin(), candidates.end(), inst.label);
  if (it == candidates.end()) {
    fail(ErrorCode::kLabelOutsideTrainSet,
         "instance '" + inst.id + "' label is not among the candidates");
  }
  return it - candidates.begin();
}

}  // namespace

double compat_loss(const CompatModel& model, std::span<const Instance> batch,
                   const AttributeTable& attrs,
                   std::span<const LabelId> candidates) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  double total = 0.0;
  for (const auto& inst : batch) {
    total -= compat_log_scores(model, inst.features, attrs,
                               candidates)(candidate_index(candidates, inst));
  }
  return total / static_cast<double>(batch.size());
}

namespace {

// Adds the gradient of -log S(x, y) for one instance.
void accumulate_compat_gradient(const CompatModel& model, const Instance& inst,
                                Eigen::Index target,
                                const Eigen::MatrixXd& cand_attrs,
                                Eigen::MatrixXd& gw1, Eigen::MatrixXd& gw2) {
  auto fwd = model.forward(inst.features);
  Eigen::VectorXd p = log_softmax(cand_attrs * fwd.embedding).array().exp();
  p(target) -= 1.0;
  Eigen::VectorXd d_embedding = cand_attrs.transpose() * p;
  model.backward(fwd, inst.features, d_embedding, gw1, gw2);
}

Eigen::MatrixXd gather_rows(const AttributeTable& attrs,
                            std::span<const LabelId> labels) {
  Eigen::MatrixXd out(labels.size(), attrs.dim());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= attrs.size()) {
      fail(ErrorCode::kMissingAttribute,
           "no attribute vector for label id " + std::to_string(labels[i]));
    }
    out.row(i) = attrs.matrix().row(labels[i]);
  }
  return out;
}

}  // namespace

CompatGradient compat_loss_gradient(const CompatModel& model,
                                    std::span<const Instance> batch,
                                    const AttributeTable& attrs,
                                    std::span<const LabelId> candidates) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  const auto cand_attrs = gather_rows(attrs, candidates);
  CompatGradient g{Eigen::MatrixXd::Zero(model.w1().rows(), model.w1().cols()),
                   Eigen::MatrixXd::Zero(model.w2().rows(), model.w2().cols())};
  for (const auto& inst : batch) {
    accumulate_compat_gradient(model, inst, candidate_index(candidates, inst),
                               cand_attrs, g.w1, g.w2);
  }
  g.w1 /= static_cast<double>(batch.size());
  g.w2 /= static_cast<double>(batch.size());
  return g;
}

CompatTrainResult train_compat(CompatModel model,
                               std::span<const Instance> train,
                               const AttributeTable& attrs,
                               std::span<const LabelId> classes,
                               const TrainConfig& config) {
  validate(config);
  if (train.empty()) fail(ErrorCode::kEmptyDataset, "no training instances");
  check_dims(train, model.feature_dim());
  const auto cand_attrs = gather_rows(attrs, classes);
  std::vector<Eigen::Index> target(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    target[i] = candidate_index(classes, train[i]);
  }

  auto trace = run_minibatch_sgd(
      train.size(), config,
      [&] { return compat_loss(model, train, attrs, classes); },
      [&](std::span<const std::size_t> batch, double lr) {
        Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(model.w1().rows(),
                                                    model.w1().cols());
        Eigen::MatrixXd gw2 = Eigen::MatrixXd::Zero(model.w2().rows(),
                                                    model.w2().cols());
        for (std::size_t i : batch) {
          accumulate_compat_gradient(model, train[i], target[i], cand_attrs,
                                     gw1, gw2);
        }
        const double scale = lr / static_cast<double>(batch.size());
        model.w1() -= scale * gw1;
        model.w2() -= scale * gw2;
      });
  return {std::move(model), std::move(trace)};
}

// ---------------------------------------------------------------------------
// ConSE

Eigen::VectorXd conse_weights(const Eigen::VectorXd& probs,
                              const ConseConfig& cfg) {
  const auto k = probs.size();
  if (cfg.m < 1 || cfg.m > k) {
    fail(ErrorCode::kConfigInvalid, "ConSE m=" + std::to_string(cfg.m) +
                                        " outside [1, " + std::to_string(k) +
                                        "]");
  }
  std::vector<Eigen::Index> order(k);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Head classes are ascending by label id, so index order is id order.
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return probs(a) > probs(b);
                   });
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(k);
  double z = 0.0;
  for (int j = 0; j < cfg.m; ++j) {
    weights(order[j]) = probs(order[j]);
    z += probs(order[j]);
  }
  if (!(z > 0.0)) {
    fail(ErrorCode::kDegenerateZ, "top-m probabilities sum to zero");
  }
  return weights / z;
}

Eigen::VectorXd conse_embed(const Eigen::VectorXd& probs,
                            std::span<const LabelId> classes,
                            const AttributeTable& attrs,
                            const ConseConfig& cfg) {
  if (static_cast<Eigen::Index>(classes.size()) != probs.size()) {
    fail(ErrorCode::kDimensionMismatch, "one probability per class required");
  }
  auto weights = conse_weights(probs, cfg);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(attrs.dim());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights(i) == 0.0) continue;
    if (classes[i] < 0 || static_cast<std::size_t>(classes[i]) >= attrs.size()) {
      fail(ErrorCode::kMissingAttribute, "no attribute vector for class id " +
                                             std::to_string(classes[i]));
    }
    out += weights(i) * attrs.matrix().row(classes[i]).transpose();
  }
  return out;
}

LabelId devise_predict(const CompatModel& model, const Eigen::VectorXd& h,
                       const AttributeTable& attrs,
                       std::span<const LabelId> candidates) {
  auto scores = compat_log_scores(model, h, attrs, candidates);
  return candidates[argmax_by_label(candidates, scores)];
}

LabelId conse_predict(const SoftmaxHead& head, const Eigen::VectorXd& h,
                      const AttributeTable& attrs, const ConseConfig& cfg,
                      std::span<const LabelId> candidates) {
  if (candidates.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  auto eps = conse_embed(head.probabilities(h), head.classes(), attrs, cfg);
  Eigen::VectorXd scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 0 ||
        static_cast<std::size_t>(candidates[i]) >= attrs.size()) {
      fail(ErrorCode::kMissingAttribute, "no attribute vector for label id " +
                                             std::to_string(candidates[i]));
    }
    scores(i) = cosine_similarity(attrs.vector(candidates[i]), eps);
  }
  return candidates[argmax_by_label(candidates, scores)];
}

}  // namespace hzsl
