#pragma once

#include <stdexcept>
#include <string>

namespace dsbmm {

/// Failure categories raised by the library. Each value names one
/// contract violation; the message carries the offending location.
enum class ErrorCode {
  AsymmetricUndirectedLayer,
  SelfLoopPresent,
  WeightIndicatorMismatch,
  NonPositiveWeight,
  ParseError,
  IndexOutOfRange,
  DuplicateDyadTime,
  IoError,
  NonFiniteParameter,
  InvalidParameter,
  NotPositiveDefinite,
  NotASimplex,
  UnknownPreset,
  TooFewNodes,
  ZeroProbabilityEntry,
  InvalidConfig,
  StateOutOfRange,
  DimensionMismatch,
  InconsistentEdge,
  SingularDesign,
  NumericalUnderflow,
  DegenerateClustering,
  CorruptCheckpoint,
  LengthMismatch,
  EmptyChain,
  MissingTruth,
  ConstantChain,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dsbmm
