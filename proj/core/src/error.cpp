#include "mvkp/error.hpp"

namespace mvkp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateDepth: return "DegenerateDepth";
    case ErrorCode::kCoincidentCenters: return "CoincidentCenters";
    case ErrorCode::kDegenerateLine: return "DegenerateLine";
    case ErrorCode::kPlaneThroughPrincipalAxis: return "PlaneThroughPrincipalAxis";
    case ErrorCode::kEpipolePixel: return "EpipolePixel";
    case ErrorCode::kInsufficientViews: return "InsufficientViews";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kOutOfBoundsAnnotation: return "OutOfBoundsAnnotation";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kEmptyEvaluationSet: return "EmptyEvaluationSet";
    case ErrorCode::kBadCurve: return "BadCurve";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      detail_(message) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mvkp
