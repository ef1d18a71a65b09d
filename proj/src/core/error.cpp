#include "core/error.hpp"

namespace hzsl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kMultipleParents: return "multiple-parents";
    case ErrorCode::kCycleDetected: return "cycle-detected";
    case ErrorCode::kMultipleRoots: return "multiple-roots";
    case ErrorCode::kDisconnected: return "disconnected";
    case ErrorCode::kUnknownKeepLabel: return "unknown-keep-label";
    case ErrorCode::kNoArborescence: return "no-arborescence";
    case ErrorCode::kLevelBelowNode: return "level-below-node";
    case ErrorCode::kUnknownLabel: return "unknown-label";
    case ErrorCode::kMissingLabel: return "missing-label";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kMalformedHeader: return "malformed-header";
    case ErrorCode::kZeroVector: return "zero-vector";
    case ErrorCode::kLabelOutsideTrainSet: return "label-outside-train-set";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kMissingAttribute: return "missing-attribute";
    case ErrorCode::kDegenerateZ: return "degenerate-z";
    case ErrorCode::kNonFiniteEnergy: return "non-finite-energy";
    case ErrorCode::kEmptyLevel: return "empty-level";
    case ErrorCode::kEmptyCandidates: return "empty-candidates";
    case ErrorCode::kCandidateAboveLevel: return "candidate-above-level";
    case ErrorCode::kDegenerateTree: return "degenerate-tree";
    case ErrorCode::kEmptyList: return "empty-list";
    case ErrorCode::kCrossFileInconsistency: return "cross-file-inconsistency";
    case ErrorCode::kConfigInvalid: return "config-invalid";
    case ErrorCode::kEmptySplit: return "empty-split";
    case ErrorCode::kMissingPrerequisiteCheckpoint:
      return "missing-prerequisite-checkpoint";
    case ErrorCode::kFingerprintMismatch: return "fingerprint-mismatch";
    case ErrorCode::kNumericalCheckFailed: return "numerical-check-failed";
  }
  return "unknown";
}

}  // namespace hzsl
