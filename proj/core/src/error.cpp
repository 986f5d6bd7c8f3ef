#include "kinetunnel/error.hpp"

namespace kinetunnel {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CollinearPoints: return "CollinearPoints";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::DegeneratePath: return "DegeneratePath";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::JointLimit: return "JointLimit";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SegmentationFailed: return "SegmentationFailed";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::BadLength: return "BadLength";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::BadMessage: return "BadMessage";
    case ErrorCode::UnknownTrajectory: return "UnknownTrajectory";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

SegmentationError::SegmentationError(std::size_t found, std::size_t expected)
    : Error(ErrorCode::SegmentationFailed,
            "segmentation found " + std::to_string(found) + " repetitions, expected " +
                std::to_string(expected)),
      found_(found),
      expected_(expected) {}

}  // namespace kinetunnel
