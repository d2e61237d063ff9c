#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loganmeta {

enum class ErrorCode {
  EmptyLine,
  LengthMismatch,
  IdOutOfRange,
  EmptyMatrix,
  DimensionMismatch,
  ShapeMismatch,
  StaleCache,
  InsufficientSamples,
  TooFewClasses,
  NoValidTriplet,
  EmptyClass,
  UnknownLabel,
  BatchMismatch,
  NonFiniteLoss,
  InvalidSpec,
  InvalidConfig,
  DegenerateData,
  Io,
  Format,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyLine: return "EmptyLine";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::NoValidTriplet: return "NoValidTriplet";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::BatchMismatch: return "BatchMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Input-validation failures (bad arguments, malformed files, unsatisfiable
  /// configs) as opposed to failures discovered while computing.
  bool is_validation() const noexcept {
    switch (code_) {
      case ErrorCode::NonFiniteLoss:
      case ErrorCode::Io:
        return false;
      default:
        return true;
    }
  }

 private:
  ErrorCode code_;
};

}  // namespace loganmeta
