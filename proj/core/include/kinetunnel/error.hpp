#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kinetunnel {

enum class ErrorCode {
  CollinearPoints,
  CoincidentPoints,
  DegeneratePath,
  WrongPhase,
  NonMonotonicTime,
  JointLimit,
  Unreachable,
  NoConvergence,
  SegmentationFailed,
  TooFewPairs,
  TooFewSamples,
  BadLength,
  OutOfRange,
  DegenerateVariance,
  RankDeficient,
  SchemaViolation,
  BadMessage,
  UnknownTrajectory,
  InvalidArgument,
};

/// Stable name used on the wire and in diagnostics, e.g. "WrongPhase".
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Repetition segmentation found a different number of strokes than expected.
class SegmentationError : public Error {
 public:
  SegmentationError(std::size_t found, std::size_t expected);

  std::size_t found() const noexcept { return found_; }
  std::size_t expected() const noexcept { return expected_; }

 private:
  std::size_t found_;
  std::size_t expected_;
};

/// Inverse kinematics failed for one sample of a longer stream.
class SampleError : public Error {
 public:
  SampleError(ErrorCode code, std::size_t index, const std::string& message)
      : Error(code, message), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace kinetunnel
