#include "core/utility.hpp"

#include <algorithm>

#include "core/crf.hpp"
#include "core/error.hpp"

namespace hzsl {

UtilityKind parse_utility_kind(std::string_view name) {
  if (name == "exact") return UtilityKind::kExactMatch;
  if (name == "pathlen") return UtilityKind::kPathLength;
  if (name == "subtreedepth") return UtilityKind::kSubtreeDepth;
  fail(ErrorCode::kInvalidArgument,
       "unknown utility '" + std::string(name) +
           "' (expected exact|pathlen|subtreedepth)");
}

std::string_view utility_kind_name(UtilityKind kind) {
  switch (kind) {
    case UtilityKind::kExactMatch:
      return "exact";
    case UtilityKind::kPathLength:
      return "pathlen";
    case UtilityKind::kSubtreeDepth:
      return "subtreedepth";
  }
  return "?";
}

namespace {

int path_length_normalizer(const LabelHierarchy& h, PathLengthNorm norm) {
  const int n = norm == PathLengthNorm::kDiameter ? h.diameter() : h.max_depth();
  if (n == 0) {
    fail(ErrorCode::kDegenerateTree,
         "path-length utility is undefined on a single-node hierarchy");
  }
  return n;
}

}  // namespace

double u_path_length(const LabelHierarchy& h, LabelId pred, LabelId truth,
                     PathLengthNorm norm) {
  const double scale = path_length_normalizer(h, norm);
  return std::max(0.0, 1.0 - h.tree_distance(pred, truth) / scale);
}

double u_subtree_depth(const LabelHierarchy& h, LabelId pred, LabelId truth) {
  if (!h.is_ancestor_or_self(pred, truth)) return 0.0;
  if (pred == truth) return 1.0;
  return static_cast<double>(h.depth(pred)) / h.depth(truth);
}

UtilitySpec::UtilitySpec(UtilityKind kind, const LabelHierarchy& h,
                         PathLengthNorm norm)
    : kind_(kind), h_(&h), norm_(norm) {
  if (kind_ == UtilityKind::kPathLength) {
    path_length_normalizer(h, norm);
    path_table_ = table();
  }
}

double UtilitySpec::operator()(LabelId pred, LabelId truth) const {
  switch (kind_) {
    case UtilityKind::kExactMatch:
      if (!h_->contains(pred) || !h_->contains(truth)) {
        fail(ErrorCode::kUnknownLabel, "node id out of range");
      }
      return pred == truth ? 1.0 : 0.0;
    case UtilityKind::kPathLength:
      return u_path_length(*h_, pred, truth, norm_);
    case UtilityKind::kSubtreeDepth:
      return u_subtree_depth(*h_, pred, truth);
  }
  return 0.0;
}

Eigen::MatrixXd UtilitySpec::table() const {
  const auto n = static_cast<LabelId>(h_->size());
  Eigen::MatrixXd t(n, n);
  for (LabelId a = 0; a < n; ++a) {
    for (LabelId b = 0; b < n; ++b) t(a, b) = (*this)(a, b);
  }
  return t;
}

double expected_utility(const PathDistribution& dist, LabelId pred,
                        const UtilitySpec& spec) {
  double total = 0.0;
  for (LabelId y = 0; y < static_cast<LabelId>(dist.prob.size()); ++y) {
    total += dist.prob(y) * spec(pred, y);
  }
  return total;
}

Eigen::VectorXd expected_utilities(const PathDistribution& dist,
                                   const UtilitySpec& spec) {
  const auto& h = spec.hierarchy();
  if (static_cast<std::size_t>(dist.prob.size()) != h.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "distribution does not match the utility's hierarchy");
  }
  switch (spec.kind()) {
    case UtilityKind::kExactMatch:
      return dist.prob;
    case UtilityKind::kSubtreeDepth: {
      // Each truth y contributes p(y) depth(a)/depth(y) to its ancestors a.
      Eigen::VectorXd out = Eigen::VectorXd::Zero(dist.prob.size());
      for (LabelId y = 0; y < static_cast<LabelId>(h.size()); ++y) {
        if (y == h.root()) {
          out(y) += dist.prob(y);
          continue;
        }
        const double inv_depth = 1.0 / h.depth(y);
        for (LabelId a : h.path(y)) {
          out(a) += dist.prob(y) * (a == y ? 1.0 : h.depth(a) * inv_depth);
        }
      }
      return out;
    }
    case UtilityKind::kPathLength:
      return spec.path_table() * dist.prob;
  }
  return {};
}

double mean_utility(std::span<const std::pair<LabelId, LabelId>> predictions,
                    const UtilitySpec& spec) {
  if (predictions.empty()) {
    fail(ErrorCode::kEmptyList, "mean utility of an empty prediction list");
  }
  double total = 0.0;
  for (const auto& [pred, truth] : predictions) total += spec(pred, truth);
  return total / static_cast<double>(predictions.size());
}

}  // namespace hzsl
