#include "kinetunnel/session.hpp"

#include "kinetunnel/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kinetunnel {

std::string_view to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::Calibrating: return "calibrating";
    case Phase::Selecting: return "selecting";
    case Phase::Executing: return "executing";
    case Phase::Stopped: return "stopped";
  }
  return "calibrating";
}

Session::Session(FeedbackConfig config) : config_(config) {}

void Session::require(Phase expected, std::string_view what) const {
  if (phase_ != expected) {
    throw Error(ErrorCode::WrongPhase, std::string(what) + " is not allowed while " +
                                           std::string(to_string(phase_)));
  }
}

CommandOutcome Session::apply(const Command& cmd) {
  return std::visit([this](const auto& c) { return on(c); }, cmd);
}

CommandOutcome Session::on(const command::Calibrate& c) {
  require(Phase::Calibrating, "calibrate");
  if (!c.point.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "calibration point is not finite");
  }
  if (calibration_.size() == 2) {
    // Validate before committing so a bad third point can simply be retried.
    frame_ = frame_from_three_points(calibration_[0], calibration_[1], c.point);
    calibration_.push_back(c.point);
    phase_ = Phase::Selecting;
  } else {
    calibration_.push_back(c.point);
  }
  return {};
}

CommandOutcome Session::on(const command::SelectTrajectory& c) {
  require(Phase::Selecting, "select");
  if (c.trajectory.via_points.empty()) {
    throw Error(ErrorCode::DegeneratePath, "trajectory has no via-points");
  }
  selected_ = c.trajectory;
  placement_ = Vec3::Zero();
  return {};
}

CommandOutcome Session::on(const command::PlaceMove& c) {
  require(Phase::Selecting, "place_move");
  if (!selected_) {
    throw Error(ErrorCode::InvalidArgument, "no trajectory selected");
  }
  // Placement stays on the calibrated plane: the vertical request is dropped.
  placement_ += Vec3(c.dx, c.dy, 0.0);
  return {};
}

CommandOutcome Session::on(const command::SetCI& c) {
  require(Phase::Selecting, "set_ci");
  ci_ = c.ci;
  return {};
}

CommandOutcome Session::on(const command::Start&) {
  require(Phase::Selecting, "start");
  if (!selected_) {
    throw Error(ErrorCode::InvalidArgument, "no trajectory selected");
  }
  active_ = placed_trajectory();
  index_ = build_spatial_index(active_, ci_);
  tunnel_ = TunnelState(active_.via_points.size(), ci_, config_);
  tracked_.clear();
  repetitions_ = 0;
  left_start_ = false;
  phase_ = Phase::Executing;

  FeedbackUpdate paint;
  paint.changed.reserve(tunnel_.size());
  for (std::size_t i = 0; i < tunnel_.size(); ++i) {
    paint.changed.push_back({i, tunnel_.look(i)});
  }
  paint.current_error = 0.0;
  paint.path_point = active_.start_point();
  return {paint, std::nullopt};
}

CommandOutcome Session::on(const command::Stop&) {
  require(Phase::Executing, "stop");
  phase_ = Phase::Stopped;
  return {std::nullopt, summary()};
}

CommandOutcome Session::on(const command::SetMode& c) {
  if (phase_ != Phase::Selecting && phase_ != Phase::Executing) {
    throw Error(ErrorCode::WrongPhase,
                "set_mode is not allowed while " + std::string(to_string(phase_)));
  }
  mode_ = c.mode;
  return {};
}

CommandOutcome Session::on(const command::ResetTunnel&) {
  if (phase_ == Phase::Executing) {
    FeedbackUpdate update;
    tunnel_.reset(&update.changed);
    left_start_ = false;
    update.t_ms = tracked_.empty() ? 0.0 : tracked_.back().t_ms;
    update.repetition = repetitions_;
    if (!tracked_.empty()) {
      const NearestResult hit = index_.nearest(tracked_.back().pos);
      update.nearest_index = hit.index;
      update.current_error = hit.distance;
    }
    update.path_point = active_.via_points[update.nearest_index];
    return {update, std::nullopt};
  }
  if (phase_ == Phase::Stopped) {
    tracked_.clear();
    repetitions_ = 0;
    phase_ = Phase::Selecting;
    return {};
  }
  throw Error(ErrorCode::WrongPhase,
              "reset_tunnel is not allowed while " + std::string(to_string(phase_)));
}

FeedbackUpdate Session::process_sample(const HandSample& sample) {
  require(Phase::Executing, "hand_sample");
  if (!sample.pos.allFinite() || !std::isfinite(sample.t_ms)) {
    throw Error(ErrorCode::InvalidArgument, "hand sample is not finite");
  }
  if (!tracked_.empty() && sample.t_ms < tracked_.back().t_ms) {
    throw Error(ErrorCode::NonMonotonicTime, "hand sample time went backwards");
  }

  FeedbackUpdate update;
  update.t_ms = sample.t_ms;

  const bool inside_start = (sample.pos - active_.start_point()).norm() <= config_.repetition_radius;
  if (!inside_start) {
    left_start_ = true;
  } else if (left_start_) {
    left_start_ = false;
    ++repetitions_;
    if (mode_ == FeedbackMode::ResetPerRep) tunnel_.reset(&update.changed);
  }

  const NearestResult hit = index_.nearest(sample.pos);
  update.nearest_index = hit.index;
  update.current_error = hit.distance;
  update.path_point = active_.via_points[hit.index];
  if (tunnel_.record(hit.index, hit.distance)) {
    auto same = std::find_if(update.changed.begin(), update.changed.end(),
                             [&](const SphereChange& c) { return c.index == hit.index; });
    if (same != update.changed.end()) {
      same->look = tunnel_.look(hit.index);
    } else {
      update.changed.push_back({hit.index, tunnel_.look(hit.index)});
    }
  }
  update.repetition = repetitions_;
  tracked_.push_back(sample);
  return update;
}

Trajectory Session::placed_trajectory() const {
  if (!selected_) {
    throw Error(ErrorCode::InvalidArgument, "no trajectory selected");
  }
  return translated_in_plane(*selected_, placement_);
}

SessionSummary Session::summary() const {
  SessionSummary s;
  s.trajectory_id = selected_ ? selected_->id : std::string();
  s.ci = ci_;
  s.mode = mode_;
  s.repetitions = repetitions_;
  s.best_errors = tunnel_.best_errors();
  s.tracked_path = tracked_;
  return s;
}

}  // namespace kinetunnel
