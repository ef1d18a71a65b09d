#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/attributes.hpp"
#include "core/checkpoint.hpp"
#include "core/hierarchy.hpp"

namespace hzsl {

struct Instance {
  std::string id;
  Eigen::VectorXd features;
  LabelId label = kNoLabel;

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.id == b.id && a.label == b.label &&
           a.features.size() == b.features.size() && a.features == b.features;
  }
};

// Plain mini-batch gradient descent settings shared by every trainer.
struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 7;
  // Learning rate is multiplied by lr_decay every decay_every epochs
  // (0 disables decay).
  double lr_decay = 1.0;
  int decay_every = 0;
  // Rescales each mini-batch gradient to at most this global L2 norm
  // (0 disables). Only the CRF trainer honours it.
  double clip_norm = 0.0;
};

void validate(const TrainConfig& config);

// Numerically stable log-softmax.
Eigen::VectorXd log_softmax(const Eigen::VectorXd& scores);
double log_sum_exp(const Eigen::VectorXd& scores);

// Index of the best score; ties go to the smallest label id.
std::size_t argmax_by_label(std::span<const LabelId> labels,
                            const Eigen::VectorXd& scores);

// ---------------------------------------------------------------------------
// Linear softmax classifier over the training classes. Stands in for the
// frozen image classifier and is never updated after pretraining.

class SoftmaxHead {
 public:
  SoftmaxHead() = default;
  // `classes` must be strictly ascending.
  SoftmaxHead(std::vector<LabelId> classes, Eigen::MatrixXd weights,
              Eigen::VectorXd bias);
  static SoftmaxHead initialize(std::vector<LabelId> classes, int feature_dim,
                                std::uint64_t seed);

  const std::vector<LabelId>& classes() const { return classes_; }
  int feature_dim() const { return static_cast<int>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }

  Eigen::VectorXd logits(const Eigen::VectorXd& h) const;
  Eigen::VectorXd probabilities(const Eigen::VectorXd& h) const;

  Checkpoint to_checkpoint(std::uint64_t fingerprint) const;
  static SoftmaxHead from_checkpoint(const Checkpoint& ckpt,
                                     std::uint64_t fingerprint);

  friend bool operator==(const SoftmaxHead& a, const SoftmaxHead& b) {
    return a.classes_ == b.classes_ && a.weights_ == b.weights_ &&
           a.bias_ == b.bias_;
  }

 private:
  std::vector<LabelId> classes_;
  Eigen::MatrixXd weights_;  // |classes| x d_feature
  Eigen::VectorXd bias_;
};

struct HeadTrainResult {
  SoftmaxHead head;
  std::vector<double> loss_trace;  // [0] initial, [e] after epoch e
};

double softmax_head_loss(const SoftmaxHead& head,
                         std::span<const Instance> batch);

// Throws kEmptyDataset, kLabelOutsideTrainSet, kDimensionMismatch.
HeadTrainResult train_softmax_head(std::span<const Instance> train,
                                   std::vector<LabelId> classes,
                                   const TrainConfig& config);

// ---------------------------------------------------------------------------
// Two-layer compatibility network: S(x, c) = softmax_c(a_c . g(W2 g(W1 h)))
// with g = ReLU.

class CompatModel {
 public:
  struct Forward {
    Eigen::VectorXd hidden_pre;  // W1 h
    Eigen::VectorXd hidden;      // g(W1 h)
    Eigen::VectorXd out_pre;     // W2 g(W1 h)
    Eigen::VectorXd embedding;   // g(W2 g(W1 h))
  };

  CompatModel() = default;
  CompatModel(Eigen::MatrixXd w1, Eigen::MatrixXd w2);
  static CompatModel initialize(int feature_dim, int hidden_dim, int embed_dim,
                                std::uint64_t seed);

  const Eigen::MatrixXd& w1() const { return w1_; }
  const Eigen::MatrixXd& w2() const { return w2_; }
  Eigen::MatrixXd& w1() { return w1_; }
  Eigen::MatrixXd& w2() { return w2_; }
  int feature_dim() const { return static_cast<int>(w1_.cols()); }
  int hidden_dim() const { return static_cast<int>(w1_.rows()); }
  int embed_dim() const { return static_cast<int>(w2_.rows()); }

  Forward forward(const Eigen::VectorXd& h) const;
  Eigen::VectorXd embed(const Eigen::VectorXd& h) const {
    return forward(h).embedding;
  }

  // Accumulates dL/dW1, dL/dW2 given dL/d(embedding).
  void backward(const Forward& fwd, const Eigen::VectorXd& h,
                const Eigen::VectorXd& d_embedding, Eigen::MatrixXd& grad_w1,
                Eigen::MatrixXd& grad_w2) const;

  Checkpoint to_checkpoint(std::uint64_t fingerprint) const;
  static CompatModel from_checkpoint(const Checkpoint& ckpt,
                                     std::uint64_t fingerprint);

  friend bool operator==(const CompatModel& a, const CompatModel& b) {
    return a.w1_.rows() == b.w1_.rows() && a.w1_.cols() == b.w1_.cols() &&
           a.w2_.rows() == b.w2_.rows() && a.w2_.cols() == b.w2_.cols() &&
           a.w1_ == b.w1_ && a.w2_ == b.w2_;
  }

 private:
  Eigen::MatrixXd w1_;  // d_hidden x d_feature
  Eigen::MatrixXd w2_;  // d_embed x d_hidden
};

// Raw scores a_c . embedding for each candidate. Throws kMissingAttribute.
Eigen::VectorXd compat_raw_scores(const Eigen::VectorXd& embedding,
                                  const AttributeTable& attrs,
                                  std::span<const LabelId> candidates);

// log S(x, c) over `candidates` (log-softmax of the raw scores).
Eigen::VectorXd compat_log_scores(const CompatModel& model,
                                  const Eigen::VectorXd& h,
                                  const AttributeTable& attrs,
                                  std::span<const LabelId> candidates);

struct CompatGradient {
  Eigen::MatrixXd w1;
  Eigen::MatrixXd w2;
};

// Mean of -log S(x, y) over the batch with the given candidate set.
double compat_loss(const CompatModel& model, std::span<const Instance> batch,
                   const AttributeTable& attrs,
                   std::span<const LabelId> candidates);
CompatGradient compat_loss_gradient(const CompatModel& model,
                                    std::span<const Instance> batch,
                                    const AttributeTable& attrs,
                                    std::span<const LabelId> candidates);

struct CompatTrainResult {
  CompatModel model;
  std::vector<double> loss_trace;
};

// Minimizes compat_loss with candidates = `classes` (the training classes).
CompatTrainResult train_compat(CompatModel model,
                               std::span<const Instance> train,
                               const AttributeTable& attrs,
                               std::span<const LabelId> classes,
                               const TrainConfig& config);

// ---------------------------------------------------------------------------
// Convex combination of training-class attribute vectors.

struct ConseConfig {
  int m = 10;
};

// Coefficients over the head's classes: the top-m probabilities (ties to the
// smaller label id) divided by their sum; all other entries zero.
Eigen::VectorXd conse_weights(const Eigen::VectorXd& probs,
                              const ConseConfig& cfg);
Eigen::VectorXd conse_embed(const Eigen::VectorXd& probs,
                            std::span<const LabelId> classes,
                            const AttributeTable& attrs,
                            const ConseConfig& cfg);

LabelId devise_predict(const CompatModel& model, const Eigen::VectorXd& h,
                       const AttributeTable& attrs,
                       std::span<const LabelId> candidates);
LabelId conse_predict(const SoftmaxHead& head, const Eigen::VectorXd& h,
                      const AttributeTable& attrs, const ConseConfig& cfg,
                      std::span<const LabelId> candidates);

}  // namespace hzsl
