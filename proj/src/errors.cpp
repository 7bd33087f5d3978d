#include "dsbmm/errors.hpp"

namespace dsbmm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AsymmetricUndirectedLayer: return "AsymmetricUndirectedLayer";
    case ErrorCode::SelfLoopPresent: return "SelfLoopPresent";
    case ErrorCode::WeightIndicatorMismatch: return "WeightIndicatorMismatch";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateDyadTime: return "DuplicateDyadTime";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NonFiniteParameter: return "NonFiniteParameter";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotASimplex: return "NotASimplex";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::TooFewNodes: return "TooFewNodes";
    case ErrorCode::ZeroProbabilityEntry: return "ZeroProbabilityEntry";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StateOutOfRange: return "StateOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InconsistentEdge: return "InconsistentEdge";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::DegenerateClustering: return "DegenerateClustering";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyChain: return "EmptyChain";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::ConstantChain: return "ConstantChain";
  }
  return "Unknown";
}

}  // namespace dsbmm
