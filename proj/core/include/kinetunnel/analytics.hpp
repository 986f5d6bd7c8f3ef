#pragma once

#include "kinetunnel/arm_model.hpp"
#include "kinetunnel/error.hpp"
#include "kinetunnel/feedback.hpp"
#include "kinetunnel/geometry.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kinetunnel {

// ---------------------------------------------------------------------------
// Repetition segmentation and time normalisation
// ---------------------------------------------------------------------------

/// Inclusive sample range [first, last] of one repetition.
struct Segment {
  std::size_t first = 0;
  std::size_t last = 0;

  bool operator==(const Segment&) const = default;
};

struct SegmentationOptions {
  double radius = 0.03;
  /// An in/out change of the start sphere only counts once it has lasted this long
  /// (or the recording ends first).
  double debounce_ms = 500.0;
  /// Move each boundary from the sphere crossing to the middle of the rest
  /// spent inside the sphere, or to the recording's first/last sample when
  /// the rest touches either end. Otherwise a repetition runs from the first
  /// sample outside the sphere to the first sample back inside.
  bool snap_to_start = true;
};

/// Splits a recorded path into strokes that leave the start sphere and come back.
///
/// `n_expected == 0` accepts any count; otherwise a mismatch throws
/// SegmentationError{found, expected}.
std::vector<Segment> segment_repetitions(std::span<const HandSample> path, const Vec3& start,
                                         std::size_t n_expected,
                                         const SegmentationOptions& options = {});

/// Resamples a timed stream at `count` uniformly spaced normalised times.
///
/// Linear interpolation; the first and last samples are reproduced exactly.
/// Values must support `a + w * (b - a)`.
template <class T>
std::vector<T> time_normalize(std::span<const double> t, std::span<const T> values, std::size_t count) {
  if (t.size() != values.size()) {
    throw Error(ErrorCode::BadLength, "time and value streams differ in length");
  }
  if (values.size() < 2) {
    throw Error(ErrorCode::TooFewSamples, "time normalisation needs at least two samples");
  }
  if (count < 2) {
    throw Error(ErrorCode::InvalidArgument, "time normalisation needs at least two output samples");
  }
  const std::size_t n = values.size();
  const double t0 = t.front();
  const double span = t.back() - t0;
  // Samples without any elapsed time fall back to uniform spacing.
  auto tau_of = [&](std::size_t j) {
    return span > 0.0 ? (t[j] - t0) / span : static_cast<double>(j) / static_cast<double>(n - 1);
  };

  std::vector<T> out;
  out.reserve(count);
  out.push_back(values.front());
  std::size_t j = 0;
  for (std::size_t i = 1; i + 1 < count; ++i) {
    const double tau = static_cast<double>(i) / static_cast<double>(count - 1);
    while (j + 2 < n && tau_of(j + 1) <= tau) ++j;
    const double a = tau_of(j);
    const double b = tau_of(j + 1);
    const double w = b > a ? (tau - a) / (b - a) : 0.0;
    out.push_back(values[j] + w * (values[j + 1] - values[j]));
  }
  out.push_back(values.back());
  return out;
}

// ---------------------------------------------------------------------------
// Desired motion
// ---------------------------------------------------------------------------

/// Nominal timing of one repetition along a trajectory.
///
/// Open paths are travelled out and back, closed paths once around; each
/// leg follows a minimum-jerk arc-length profile, so the hand rests at the
/// start at phase 0 and 1.
class ReferenceMotion {
 public:
  explicit ReferenceMotion(const Trajectory& trajectory);

  Vec3 at(double phase) const;
  bool closed() const { return closed_; }
  double length() const { return cumulative_.back(); }

 private:
  Vec3 at_arc_length(double s) const;

  std::vector<Vec3> points_;
  std::vector<double> cumulative_;
  bool closed_ = false;
};

/// Phase of time `t` within a repetition running from `t_first` to `t_last`.
double cycle_phase(double t, double t_first, double t_last);

/// Desired position for every sample of `path`, given its repetitions.
/// Samples outside any repetition are mapped to the start point.
std::vector<Vec3> desired_positions(std::span<const HandSample> path, const Trajectory& trajectory,
                                    std::span<const Segment> segments);

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

enum class ErrorSpace { EndEffector, Joint };
enum class Condition { NoFeedback, C1, C2, C3 };

std::string_view to_string(ErrorSpace space) noexcept;
std::string_view to_string(Condition condition) noexcept;
ErrorSpace parse_error_space(std::string_view text);
/// Accepts no|c1|c2|c3 in either case.
Condition parse_condition(std::string_view text);
Condition condition_for(ConfidenceInterval ci) noexcept;

/// N repetitions, each resampled to I paired samples.
template <class T>
struct RepetitionSetT {
  std::vector<std::vector<T>> actual;
  std::vector<std::vector<T>> desired;
};
using RepetitionSet = RepetitionSetT<Vec3>;
using JointRepetitionSet = RepetitionSetT<JointVector>;

struct ErrorSummary {
  /// [repetition][sample]; joint space stores the mean over joints.
  std::vector<std::vector<double>> per_sample_rmse;
  std::vector<double> per_rep_mean;
  /// Meters, or radians in joint space.
  double err = 0.0;
  /// Joint space only: the error of each joint before averaging.
  std::vector<double> per_joint_err;
  ErrorSpace space = ErrorSpace::EndEffector;
  std::string subject_id;
  std::string exercise_id;
  Condition condition = Condition::NoFeedback;
};

/// Euclidean distance between actual and desired hand positions.
inline double sample_rmse(const Vec3& actual, const Vec3& desired) { return (actual - desired).norm(); }

/// Mean over samples, then mean over repetitions.
ErrorSummary err_task(const RepetitionSet& reps);

/// Per-joint absolute error aggregated like err_task, then averaged over the four joints.
ErrorSummary joint_err_task(const JointRepetitionSet& reps);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

struct AnalysisOptions {
  std::size_t repetitions = 5;
  std::size_t samples = 200;
  SegmentationOptions segmentation;
};

ErrorSummary analyze_end_effector(std::span<const HandSample> path, const Trajectory& trajectory,
                                  const AnalysisOptions& options = {});

/// Joint angles of the measured and desired hand paths, sample by sample.
struct JointLog {
  std::vector<double> t_ms;
  std::vector<JointVector> actual;
  std::vector<JointVector> desired;
};

ErrorSummary analyze_joint(const JointLog& log, std::span<const Segment> segments,
                           std::size_t samples = 200);

}  // namespace kinetunnel
