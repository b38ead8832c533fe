#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace moeload {

enum class ErrorCode {
  kInvalidArgument,
  kUnknownLayer,
  kZeroRowSum,
  kIndexOutOfRange,
  kRangeOutOfBounds,
  kParseError,
  kValidationError,
  kNonContiguousIterations,
  kIoError,
  kInvalidConfig,
  kNonStationaryCoefficients,
  kSeriesTooShort,
  kSingularRegression,
  kShapeMismatch,
  kInsufficientData,
  kDivergedLoss,
  kNonFiniteForecast,
  kLengthMismatch,
  kTraceTooShort,
  kCoverageMismatch,
  kInfeasibleMinimum,
  kConfigError,
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownLayer: return "UnknownLayer";
    case ErrorCode::kZeroRowSum: return "ZeroRowSum";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kRangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kNonContiguousIterations: return "NonContiguousIterations";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonStationaryCoefficients: return "NonStationaryCoefficients";
    case ErrorCode::kSeriesTooShort: return "SeriesTooShort";
    case ErrorCode::kSingularRegression: return "SingularRegression";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kNonFiniteForecast: return "NonFiniteForecast";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTraceTooShort: return "TraceTooShort";
    case ErrorCode::kCoverageMismatch: return "CoverageMismatch";
    case ErrorCode::kInfeasibleMinimum: return "InfeasibleMinimum";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

// All library failures are reported with this exception; `code()` identifies the failure kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace moeload
