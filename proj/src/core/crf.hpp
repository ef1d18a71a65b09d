#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "core/attributes.hpp"
#include "core/checkpoint.hpp"
#include "core/hierarchy.hpp"
#include "core/zsl_base.hpp"

namespace hzsl {

class UtilitySpec;

// Trainable CRF weights. Also used as the gradient container.
//
// Energy of the path ending at v:
//   E(v) = b + sum_{c on root..v} (wL_c fL_c + wD_c fD_c + wC_c fC_c)
// with fL = W h, fD = log-softmax over all nodes of a_c . g(W2 g(W1 h)),
// fC_c = cos(a_c, eps(x)), and p(v | x) proportional to exp(-E(v)).
struct CrfParameters {
  Eigen::VectorXd w_linear;  // wL, one weight per node
  Eigen::VectorXd w_compat;  // wD
  Eigen::VectorXd w_conse;   // wC
  double bias = 0.0;         // b (cancels in the normalizer)
  Eigen::MatrixXd linear;    // W, nodes x d_feature
  CompatModel compat;        // W1, W2

  CrfParameters zeros_like() const;
  double squared_norm() const;
  // this += scale * other
  void add_scaled(const CrfParameters& other, double scale);

  friend bool operator==(const CrfParameters& a, const CrfParameters& b);
};

// Per-class feature values for one input, before multiplication by y_c.
struct ClassFeatureBundle {
  Eigen::VectorXd linear;  // fL
  Eigen::VectorXd compat;  // fD (<= 0, exp sums to 1)
  Eigen::VectorXd conse;   // fC in [-1, 1]
};

struct PathDistribution {
  Eigen::VectorXd prob;      // indexed by ending node id
  Eigen::VectorXd log_prob;
};

struct CrfInit {
  double w_linear = 0.0;
  double w_compat = -1.0;
  double w_conse = -1.0;
  std::uint64_t seed = 7;
};

class CrfModel {
 public:
  CrfModel(std::shared_ptr<const LabelHierarchy> hierarchy,
           std::shared_ptr<const AttributeTable> attributes, SoftmaxHead head,
           ConseConfig conse, CrfParameters params);

  // W uniform in [-1/sqrt(d), 1/sqrt(d)]; per-family weights constant.
  static CrfModel initialize(std::shared_ptr<const LabelHierarchy> hierarchy,
                             std::shared_ptr<const AttributeTable> attributes,
                             SoftmaxHead head, CompatModel compat,
                             ConseConfig conse, const CrfInit& init = {});

  const LabelHierarchy& hierarchy() const { return *hierarchy_; }
  const std::shared_ptr<const LabelHierarchy>& hierarchy_ptr() const {
    return hierarchy_;
  }
  const AttributeTable& attributes() const { return *attributes_; }
  const std::shared_ptr<const AttributeTable>& attributes_ptr() const {
    return attributes_;
  }
  const SoftmaxHead& head() const { return head_; }
  const ConseConfig& conse() const { return conse_; }
  const CrfParameters& params() const { return params_; }
  CrfParameters& params() { return params_; }
  int feature_dim() const { return head_.feature_dim(); }

  // Depends only on the frozen head and attributes.
  Eigen::VectorXd conse_features(const Eigen::VectorXd& h) const;

  Checkpoint to_checkpoint() const;
  // Throws kFingerprintMismatch if the checkpoint was built on another tree.
  static CrfModel from_checkpoint(
      const Checkpoint& ckpt, std::shared_ptr<const LabelHierarchy> hierarchy,
      std::shared_ptr<const AttributeTable> attributes);

 private:
  void check_shapes() const;

  std::shared_ptr<const LabelHierarchy> hierarchy_;
  std::shared_ptr<const AttributeTable> attributes_;
  SoftmaxHead head_;
  ConseConfig conse_;
  CrfParameters params_;
  std::vector<LabelId> all_nodes_;
};

ClassFeatureBundle compute_features(const CrfModel& model,
                                    const Eigen::VectorXd& h);

// One prefix pass over the tree.
Eigen::VectorXd path_energies(const LabelHierarchy& h,
                              const CrfParameters& params,
                              const ClassFeatureBundle& bundle);

// Throws kNonFiniteEnergy.
PathDistribution path_distribution(const Eigen::VectorXd& energies);

PathDistribution predict_distribution(const CrfModel& model,
                                      const Eigen::VectorXd& h);

// Average negative log-likelihood of the true nodes' paths.
double nll(const CrfModel& model, std::span<const Instance> batch);
CrfParameters nll_gradient(const CrfModel& model,
                           std::span<const Instance> batch);

struct CrfTrainResult {
  CrfModel model;
  std::vector<double> loss_trace;  // [0] initial, [e] after epoch e
};

// Head, attributes and ConSE features stay frozen; W1/W2 train jointly with
// the CRF weights.
CrfTrainResult train_crf(CrfModel model, std::span<const Instance> train,
                         const TrainConfig& config);

// Probability mass of all paths ending in subtree(node).
double subtree_mass(const LabelHierarchy& h, const PathDistribution& dist,
                    LabelId node);
Eigen::VectorXd subtree_masses(const LabelHierarchy& h,
                               const PathDistribution& dist);

LabelId predict_free(const PathDistribution& dist);
// Throws kEmptyLevel.
LabelId predict_within_level(const LabelHierarchy& h,
                             const PathDistribution& dist, int level);
// Throws kEmptyCandidates.
LabelId predict_restricted(const PathDistribution& dist,
                           std::span<const LabelId> candidates);

struct UtilityPrediction {
  LabelId node = kNoLabel;
  double expected_utility = 0.0;
};
UtilityPrediction predict_max_utility(const PathDistribution& dist,
                                      const UtilitySpec& utility);

}  // namespace hzsl
