#include "dyco/error.hpp"

namespace dyco {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonRotation: return "NonRotation";
    case ErrorCode::SkeletonMismatch: return "SkeletonMismatch";
    case ErrorCode::CyclicTree: return "CyclicTree";
    case ErrorCode::EmptyTrack: return "EmptyTrack";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::UnsortedSamples: return "UnsortedSamples";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DatasetEmpty: return "DatasetEmpty";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace dyco
