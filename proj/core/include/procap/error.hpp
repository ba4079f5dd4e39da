#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace procap {

enum class ErrorCode {
  kDimensionMismatch,
  kNonInvertibleHomography,
  kIoFailure,
  kEmptyCorpus,
  kSchemaViolation,
  kMissingFile,
  kMaskNotBinary,
  kEmptyRefs,
  kCheckpointLoadFailure,
  kEmptyKnowledgeBase,
  kNormViolation,
  kEmptySequence,
  kNonFinite,
  kNonFiniteLoss,
  kStepOutOfRange,
  kShapeMismatch,
  kCorpusTooSmall,
  kEmptyEvalSplit,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error carrying a machine-checkable code. CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace procap
