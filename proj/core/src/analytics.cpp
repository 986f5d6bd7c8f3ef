#include "kinetunnel/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace kinetunnel {

namespace {

struct Transition {
  std::size_t index;
  bool inside;
};

// Debounced in/out changes of the start sphere.
std::vector<Transition> debounced_transitions(std::span<const HandSample> path,
                                              const std::vector<char>& inside,
                                              double debounce_ms) {
  std::vector<Transition> out;
  bool state = inside[0];
  std::size_t i = 1;
  while (i < path.size()) {
    if (static_cast<bool>(inside[i]) == state) {
      ++i;
      continue;
    }
    const double until = path[i].t_ms + debounce_ms;
    std::size_t j = i + 1;
    bool held = true;
    for (; j < path.size() && path[j].t_ms < until; ++j) {
      if (static_cast<bool>(inside[j]) == state) {
        held = false;
        break;
      }
    }
    if (held) {
      state = !state;
      out.push_back({i, state});
      i = j;
    } else {
      i = j;
    }
  }
  return out;
}

double mj_profile(double tau) { return tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau); }

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::vector<Segment> segment_repetitions(std::span<const HandSample> path, const Vec3& start,
                                         std::size_t n_expected, const SegmentationOptions& options) {
  if (path.empty()) {
    throw SegmentationError(0, n_expected);
  }
  std::vector<char> inside(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    inside[i] = (path[i].pos - start).norm() <= options.radius;
  }
  const std::vector<Transition> transitions = debounced_transitions(path, inside, options.debounce_ms);

  // Inclusive [first, last] stretches spent inside the start sphere.
  std::vector<Segment> dwell;
  std::size_t from = 0;
  bool in = inside[0];
  for (const Transition& tr : transitions) {
    if (tr.inside) {
      from = tr.index;
    } else if (in) {
      dwell.push_back({from, tr.index - 1});
    }
    in = tr.inside;
  }
  if (in) dwell.push_back({from, path.size() - 1});

  const std::size_t last = path.size() - 1;
  std::vector<Segment> segments;
  for (std::size_t k = 0; k + 1 < dwell.size(); ++k) {
    const Segment& before = dwell[k];
    const Segment& after = dwell[k + 1];
    Segment seg{before.last + 1, after.first};
    if (options.snap_to_start) {
      seg.first = before.first == 0 ? 0 : (before.first + before.last) / 2;
      seg.last = after.last == last ? last : (after.first + after.last) / 2;
    }
    segments.push_back(seg);
  }

  if (n_expected != 0 && segments.size() != n_expected) {
    throw SegmentationError(segments.size(), n_expected);
  }
  return segments;
}

ReferenceMotion::ReferenceMotion(const Trajectory& trajectory) : closed_(trajectory.closed()) {
  if (trajectory.via_points.size() < 2) {
    throw Error(ErrorCode::DegeneratePath, "reference motion needs at least two via-points");
  }
  points_ = trajectory.via_points;
  cumulative_.assign(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + (points_[i] - points_[i - 1]).norm();
  }
}

Vec3 ReferenceMotion::at_arc_length(double s) const {
  if (s <= 0.0) return points_.front();
  if (s >= cumulative_.back()) return points_.back();
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), s);
  const auto hi = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t lo = hi - 1;
  const double len = cumulative_[hi] - cumulative_[lo];
  const double w = len > 0.0 ? (s - cumulative_[lo]) / len : 0.0;
  return points_[lo] + w * (points_[hi] - points_[lo]);
}

Vec3 ReferenceMotion::at(double phase) const {
  phase = std::clamp(phase, 0.0, 1.0);
  const double length = cumulative_.back();
  if (closed_) return at_arc_length(length * mj_profile(phase));
  if (phase <= 0.5) return at_arc_length(length * mj_profile(2.0 * phase));
  return at_arc_length(length * (1.0 - mj_profile(2.0 * phase - 1.0)));
}

double cycle_phase(double t, double t_first, double t_last) {
  if (!(t_last > t_first)) return 0.0;
  return std::clamp((t - t_first) / (t_last - t_first), 0.0, 1.0);
}

std::vector<Vec3> desired_positions(std::span<const HandSample> path, const Trajectory& trajectory,
                                    std::span<const Segment> segments) {
  const ReferenceMotion reference(trajectory);
  std::vector<Vec3> desired(path.size(), trajectory.start_point());
  for (const Segment& seg : segments) {
    const double t0 = path[seg.first].t_ms;
    const double t1 = path[seg.last].t_ms;
    for (std::size_t i = seg.first; i <= seg.last; ++i) {
      desired[i] = reference.at(cycle_phase(path[i].t_ms, t0, t1));
    }
  }
  return desired;
}

std::string_view to_string(ErrorSpace space) noexcept {
  return space == ErrorSpace::EndEffector ? "ee" : "joint";
}

std::string_view to_string(Condition condition) noexcept {
  switch (condition) {
    case Condition::NoFeedback: return "no";
    case Condition::C1: return "c1";
    case Condition::C2: return "c2";
    case Condition::C3: return "c3";
  }
  return "no";
}

ErrorSpace parse_error_space(std::string_view text) {
  const std::string key = lower(text);
  if (key == "ee") return ErrorSpace::EndEffector;
  if (key == "joint") return ErrorSpace::Joint;
  throw Error(ErrorCode::InvalidArgument, "unknown error space '" + std::string(text) + "'");
}

Condition parse_condition(std::string_view text) {
  const std::string key = lower(text);
  if (key == "no") return Condition::NoFeedback;
  if (key == "c1") return Condition::C1;
  if (key == "c2") return Condition::C2;
  if (key == "c3") return Condition::C3;
  throw Error(ErrorCode::InvalidArgument, "unknown condition '" + std::string(text) + "'");
}

Condition condition_for(ConfidenceInterval ci) noexcept {
  switch (ci) {
    case ConfidenceInterval::C1: return Condition::C1;
    case ConfidenceInterval::C2: return Condition::C2;
    case ConfidenceInterval::C3: return Condition::C3;
  }
  return Condition::C1;
}

namespace {

template <class T>
void check_shape(const RepetitionSetT<T>& reps) {
  if (reps.actual.empty() || reps.actual.size() != reps.desired.size()) {
    throw Error(ErrorCode::BadLength, "repetition set needs matching, non-empty actual/desired lists");
  }
  const std::size_t samples = reps.actual.front().size();
  if (samples == 0) {
    throw Error(ErrorCode::BadLength, "repetitions must not be empty");
  }
  for (std::size_t n = 0; n < reps.actual.size(); ++n) {
    if (reps.actual[n].size() != samples || reps.desired[n].size() != samples) {
      throw Error(ErrorCode::BadLength, "all repetitions must share the same sample count");
    }
  }
}

double mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

ErrorSummary err_task(const RepetitionSet& reps) {
  check_shape(reps);
  ErrorSummary summary;
  summary.space = ErrorSpace::EndEffector;
  for (std::size_t n = 0; n < reps.actual.size(); ++n) {
    std::vector<double> rmse(reps.actual[n].size());
    for (std::size_t i = 0; i < rmse.size(); ++i) {
      rmse[i] = sample_rmse(reps.actual[n][i], reps.desired[n][i]);
    }
    summary.per_rep_mean.push_back(mean(rmse));
    summary.per_sample_rmse.push_back(std::move(rmse));
  }
  summary.err = mean(summary.per_rep_mean);
  return summary;
}

ErrorSummary joint_err_task(const JointRepetitionSet& reps) {
  check_shape(reps);
  constexpr int kJoints = 4;
  const std::size_t n_reps = reps.actual.size();
  const std::size_t n_samples = reps.actual.front().size();

  ErrorSummary summary;
  summary.space = ErrorSpace::Joint;
  summary.per_joint_err.assign(kJoints, 0.0);
  summary.per_sample_rmse.assign(n_reps, std::vector<double>(n_samples, 0.0));
  summary.per_rep_mean.assign(n_reps, 0.0);

  for (int k = 0; k < kJoints; ++k) {
    std::vector<double> rep_means(n_reps);
    for (std::size_t n = 0; n < n_reps; ++n) {
      std::vector<double> abs_err(n_samples);
      for (std::size_t i = 0; i < n_samples; ++i) {
        abs_err[i] = std::abs(reps.actual[n][i][k] - reps.desired[n][i][k]);
        summary.per_sample_rmse[n][i] += abs_err[i] / kJoints;
      }
      rep_means[n] = mean(abs_err);
      summary.per_rep_mean[n] += rep_means[n] / kJoints;
    }
    summary.per_joint_err[k] = mean(rep_means);
  }
  summary.err = mean(summary.per_joint_err);
  return summary;
}

ErrorSummary analyze_end_effector(std::span<const HandSample> path, const Trajectory& trajectory,
                                  const AnalysisOptions& options) {
  const std::vector<Segment> segments =
      segment_repetitions(path, trajectory.start_point(), options.repetitions, options.segmentation);
  if (segments.empty()) {
    throw SegmentationError(0, options.repetitions);
  }
  const std::vector<Vec3> desired = desired_positions(path, trajectory, segments);

  RepetitionSet reps;
  for (const Segment& seg : segments) {
    const std::size_t len = seg.last - seg.first + 1;
    std::vector<double> t(len);
    std::vector<Vec3> actual(len);
    for (std::size_t i = 0; i < len; ++i) {
      t[i] = path[seg.first + i].t_ms;
      actual[i] = path[seg.first + i].pos;
    }
    const std::span<const Vec3> wanted(desired.data() + seg.first, len);
    reps.actual.push_back(time_normalize<Vec3>(t, actual, options.samples));
    reps.desired.push_back(time_normalize<Vec3>(t, wanted, options.samples));
  }
  ErrorSummary summary = err_task(reps);
  summary.exercise_id = trajectory.metadata.exercise.empty() ? trajectory.id : trajectory.metadata.exercise;
  return summary;
}

ErrorSummary analyze_joint(const JointLog& log, std::span<const Segment> segments, std::size_t samples) {
  if (log.actual.size() != log.t_ms.size() || log.desired.size() != log.t_ms.size()) {
    throw Error(ErrorCode::BadLength, "joint log streams differ in length");
  }
  if (segments.empty()) {
    throw SegmentationError(0, 0);
  }
  JointRepetitionSet reps;
  for (const Segment& seg : segments) {
    if (seg.last >= log.t_ms.size() || seg.last <= seg.first) {
      throw Error(ErrorCode::OutOfRange, "segment outside the joint log");
    }
    const std::size_t len = seg.last - seg.first + 1;
    const std::span<const double> t(log.t_ms.data() + seg.first, len);
    reps.actual.push_back(
        time_normalize<JointVector>(t, std::span<const JointVector>(log.actual.data() + seg.first, len), samples));
    reps.desired.push_back(
        time_normalize<JointVector>(t, std::span<const JointVector>(log.desired.data() + seg.first, len), samples));
  }
  return joint_err_task(reps);
}

}  // namespace kinetunnel
