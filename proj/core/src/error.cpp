#include "procap/error.hpp"

namespace procap {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonInvertibleHomography: return "NonInvertibleHomography";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMaskNotBinary: return "MaskNotBinary";
    case ErrorCode::kEmptyRefs: return "EmptyRefs";
    case ErrorCode::kCheckpointLoadFailure: return "CheckpointLoadFailure";
    case ErrorCode::kEmptyKnowledgeBase: return "EmptyKnowledgeBase";
    case ErrorCode::kNormViolation: return "NormViolation";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kStepOutOfRange: return "StepOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kEmptyEvalSplit: return "EmptyEvalSplit";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace procap
