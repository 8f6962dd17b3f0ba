#pragma once

#include <stdexcept>
#include <string>

namespace mvkp {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateDepth,
  kCoincidentCenters,
  kDegenerateLine,
  kPlaneThroughPrincipalAxis,
  kEpipolePixel,
  kInsufficientViews,
  kDegenerateConfiguration,
  kNoConsensus,
  kShapeMismatch,
  kBehindCamera,
  kOutOfBoundsAnnotation,
  kConfigInvalid,
  kEmptyEvaluationSet,
  kBadCurve,
  kIo,
  kFormat,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this exception type. The code is
// the stable part of the contract; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) fail(code, message);
}

}  // namespace mvkp
