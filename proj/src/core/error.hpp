#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hzsl {

// Numeric values are part of the C ABI (see include/hzsl/hzsl.h); append only.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIo = 2,
  kParse = 3,
  kMultipleParents = 10,
  kCycleDetected = 11,
  kMultipleRoots = 12,
  kDisconnected = 13,
  kUnknownKeepLabel = 14,
  kNoArborescence = 15,
  kLevelBelowNode = 16,
  kUnknownLabel = 17,
  kMissingLabel = 20,
  kDimensionMismatch = 21,
  kMalformedHeader = 22,
  kZeroVector = 23,
  kLabelOutsideTrainSet = 30,
  kEmptyDataset = 31,
  kMissingAttribute = 32,
  kDegenerateZ = 33,
  kNonFiniteEnergy = 40,
  kEmptyLevel = 41,
  kEmptyCandidates = 42,
  kCandidateAboveLevel = 43,
  kDegenerateTree = 50,
  kEmptyList = 51,
  kCrossFileInconsistency = 60,
  kConfigInvalid = 61,
  kEmptySplit = 62,
  kMissingPrerequisiteCheckpoint = 70,
  kFingerprintMismatch = 71,
  kNumericalCheckFailed = 80,
};

const char* error_code_name(ErrorCode code);

// All library failures are reported as hzsl::Error. `subjects` carries the
// offending labels (witness nodes, missing labels, ...) when there are any.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> subjects = {})
      : std::runtime_error(message),
        code_(code),
        subjects_(std::move(subjects)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& subjects() const noexcept {
    return subjects_;
  }

 private:
  ErrorCode code_;
  std::vector<std::string> subjects_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::vector<std::string> subjects = {}) {
  throw Error(code, message, std::move(subjects));
}

}  // namespace hzsl
