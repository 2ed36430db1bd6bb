#pragma once

#include <stdexcept>
#include <string>

namespace induct {

enum class ErrorCode {
  NegativeEntry,
  RowSumOutOfTolerance,
  EmptyReturnSet,
  YUnreachable,
  DimensionMismatch,
  NonUniqueStationary,
  EmptyGrid,
  QuadratureFailure,
  MomentTooLow,
  NonNegativeDrift,
  NonIntegerAtoms,
  ExcursionCapExceeded,
  BatchTooSmall,
  TooFewSamples,
  DegenerateVariance,
  GridTooCoarse,
  ConfigInvalid,
  Internal,
};

inline const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::RowSumOutOfTolerance: return "RowSumOutOfTolerance";
    case ErrorCode::EmptyReturnSet: return "EmptyReturnSet";
    case ErrorCode::YUnreachable: return "YUnreachable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonUniqueStationary: return "NonUniqueStationary";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::MomentTooLow: return "MomentTooLow";
    case ErrorCode::NonNegativeDrift: return "NonNegativeDrift";
    case ErrorCode::NonIntegerAtoms: return "NonIntegerAtoms";
    case ErrorCode::ExcursionCapExceeded: return "ExcursionCapExceeded";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

/// Single exception type for the whole library; `code()` identifies the
/// failure class so callers (and the CLI) can report it by name.
class InductError : public std::runtime_error {
 public:
  InductError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw InductError(code, message);
}

}  // namespace induct
