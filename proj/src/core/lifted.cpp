#include "core/lifted.hpp"

#include "core/error.hpp"

namespace hzsl {

Eigen::VectorXd DeviseScorer::score(const Eigen::VectorXd& h,
                                    std::span<const LabelId> candidates) const {
  return compat_log_scores(*model_, h, *attrs_, candidates);
}

Eigen::VectorXd ConseScorer::score(const Eigen::VectorXd& h,
                                   std::span<const LabelId> candidates) const {
  if (candidates.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  const auto eps =
      conse_embed(head_->probabilities(h), head_->classes(), *attrs_, cfg_);
  Eigen::VectorXd out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 0 ||
        static_cast<std::size_t>(candidates[i]) >= attrs_->size()) {
      fail(ErrorCode::kMissingAttribute, "no attribute vector for candidate");
    }
    out(i) = cosine_similarity(attrs_->vector(candidates[i]), eps);
  }
  return out;
}

Eigen::VectorXd CrfScorer::score(const Eigen::VectorXd& h,
                                 std::span<const LabelId> candidates) const {
  if (candidates.empty()) fail(ErrorCode::kEmptyCandidates, "no candidates");
  const auto dist = predict_distribution(*model_, h);
  Eigen::VectorXd out(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!model_->hierarchy().contains(candidates[i])) {
      fail(ErrorCode::kUnknownLabel, "candidate outside the hierarchy");
    }
    out(i) = dist.prob(candidates[i]);
  }
  return out;
}

LabelId lift_predict(const BaseScorer& scorer, const Eigen::VectorXd& h,
                     std::span<const LabelId> fine_candidates, int level,
                     const LabelHierarchy& hierarchy) {
  if (fine_candidates.empty()) {
    fail(ErrorCode::kEmptyCandidates, "no fine candidates");
  }
  for (LabelId c : fine_candidates) {
    if (!hierarchy.contains(c)) {
      fail(ErrorCode::kUnknownLabel, "candidate outside the hierarchy");
    }
    if (hierarchy.depth(c) < level) {
      fail(ErrorCode::kCandidateAboveLevel,
           "candidate '" + hierarchy.label(c) + "' lies above level " +
               std::to_string(level),
           {hierarchy.label(c)});
    }
  }
  const auto scores = scorer.score(h, fine_candidates);
  const LabelId fine = fine_candidates[argmax_by_label(fine_candidates, scores)];
  return hierarchy.ancestor(fine, level);
}

LabelId direct_within_level(const BaseScorer& scorer, const Eigen::VectorXd& h,
                            const LabelHierarchy& hierarchy, int level) {
  const auto nodes = hierarchy.nodes_at_level(level);
  if (nodes.empty()) {
    fail(ErrorCode::kEmptyLevel, "no nodes at level " + std::to_string(level));
  }
  return nodes[argmax_by_label(nodes, scorer.score(h, nodes))];
}

}  // namespace hzsl
