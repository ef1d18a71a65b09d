#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>

#include "core/attributes.hpp"
#include "core/crf.hpp"
#include "core/hierarchy.hpp"
#include "core/zsl_base.hpp"

namespace hzsl {

// Scores an ordered candidate list for one feature vector. Implementations
// hold references to their models, which must outlive the scorer.
class BaseScorer {
 public:
  virtual ~BaseScorer() = default;
  virtual Eigen::VectorXd score(const Eigen::VectorXd& h,
                                std::span<const LabelId> candidates) const = 0;
  virtual std::string name() const = 0;
};

// log S_D over the candidates.
class DeviseScorer final : public BaseScorer {
 public:
  DeviseScorer(const CompatModel& model, const AttributeTable& attrs)
      : model_(&model), attrs_(&attrs) {}
  Eigen::VectorXd score(const Eigen::VectorXd& h,
                        std::span<const LabelId> candidates) const override;
  std::string name() const override { return "devise"; }

 private:
  const CompatModel* model_;
  const AttributeTable* attrs_;
};

// cos(a_c, eps(x)).
class ConseScorer final : public BaseScorer {
 public:
  ConseScorer(const SoftmaxHead& head, const AttributeTable& attrs,
              ConseConfig cfg)
      : head_(&head), attrs_(&attrs), cfg_(cfg) {}
  Eigen::VectorXd score(const Eigen::VectorXd& h,
                        std::span<const LabelId> candidates) const override;
  std::string name() const override { return "conse"; }

 private:
  const SoftmaxHead* head_;
  const AttributeTable* attrs_;
  ConseConfig cfg_;
};

// Path probabilities of the candidates.
class CrfScorer final : public BaseScorer {
 public:
  explicit CrfScorer(const CrfModel& model) : model_(&model) {}
  Eigen::VectorXd score(const Eigen::VectorXd& h,
                        std::span<const LabelId> candidates) const override;
  std::string name() const override { return "crf"; }

 private:
  const CrfModel* model_;
};

// ancestor(argmax over fine candidates, level). Throws kCandidateAboveLevel
// or kEmptyCandidates.
LabelId lift_predict(const BaseScorer& scorer, const Eigen::VectorXd& h,
                     std::span<const LabelId> fine_candidates, int level,
                     const LabelHierarchy& hierarchy);

// argmax over the level-l nodes only. Throws kEmptyLevel.
LabelId direct_within_level(const BaseScorer& scorer, const Eigen::VectorXd& h,
                            const LabelHierarchy& hierarchy, int level);

}  // namespace hzsl
