#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "core/hierarchy.hpp"

namespace hzsl {

struct PathDistribution;

enum class UtilityKind { kExactMatch, kPathLength, kSubtreeDepth };

// Normalizer for the path-length utility: tree diameter (default) or the
// maximum root-to-node depth (clamped at zero).
enum class PathLengthNorm { kDiameter, kMaxDepth };

UtilityKind parse_utility_kind(std::string_view name);  // exact|pathlen|subtreedepth
std::string_view utility_kind_name(UtilityKind kind);

// 1 - dist(pred, truth) / normalizer. Throws kDegenerateTree when the
// normalizer is zero.
double u_path_length(const LabelHierarchy& h, LabelId pred, LabelId truth,
                     PathLengthNorm norm = PathLengthNorm::kDiameter);
// depth(pred) / depth(truth) when pred is an ancestor of (or equal to) truth,
// else 0. u_subtree_depth(root, root) = 1.
double u_subtree_depth(const LabelHierarchy& h, LabelId pred, LabelId truth);

// Evaluable U(pred, truth) bound to a hierarchy, which must outlive it.
class UtilitySpec {
 public:
  UtilitySpec(UtilityKind kind, const LabelHierarchy& h,
              PathLengthNorm norm = PathLengthNorm::kDiameter);

  UtilityKind kind() const { return kind_; }
  const LabelHierarchy& hierarchy() const { return *h_; }
  double operator()(LabelId pred, LabelId truth) const;

  // N x N table, entry (pred, truth).
  Eigen::MatrixXd table() const;
  // Cached table(); only populated for kPathLength.
  const Eigen::MatrixXd& path_table() const { return path_table_; }

 private:
  UtilityKind kind_;
  const LabelHierarchy* h_;
  PathLengthNorm norm_;
  Eigen::MatrixXd path_table_;  // cached for kPathLength
};

double expected_utility(const PathDistribution& dist, LabelId pred,
                        const UtilitySpec& spec);
// Expected utility of every candidate prediction, indexed by node id.
Eigen::VectorXd expected_utilities(const PathDistribution& dist,
                                   const UtilitySpec& spec);

// Mean of U(pred, truth) over (pred, truth) pairs. Throws kEmptyList.
double mean_utility(std::span<const std::pair<LabelId, LabelId>> predictions,
                    const UtilitySpec& spec);

}  // namespace hzsl
