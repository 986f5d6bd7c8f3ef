#pragma once

#include "kinetunnel/feedback.hpp"
#include "kinetunnel/geometry.hpp"
#include "kinetunnel/spatial_index.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kinetunnel {

enum class Phase { Calibrating, Selecting, Executing, Stopped };

std::string_view to_string(Phase phase) noexcept;

namespace command {

/// One calibration point in headset (world) coordinates.
struct Calibrate {
  Vec3 point = Vec3::Zero();
};
struct SelectTrajectory {
  Trajectory trajectory;
};
/// Requested translation of the trajectory base. Only the in-plane part is used.
struct PlaceMove {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
};
struct SetCI {
  ConfidenceInterval ci = ConfidenceInterval::C1;
};
struct Start {};
struct Stop {};
struct SetMode {
  FeedbackMode mode = FeedbackMode::Overwrite;
};
/// While executing: repaint the tunnel red. After Stop: return to Selecting.
struct ResetTunnel {};

}  // namespace command

using Command = std::variant<command::Calibrate, command::SelectTrajectory, command::PlaceMove,
                             command::SetCI, command::Start, command::Stop, command::SetMode,
                             command::ResetTunnel>;

/// Snapshot handed out on Stop.
struct SessionSummary {
  std::string trajectory_id;
  ConfidenceInterval ci = ConfidenceInterval::C1;
  FeedbackMode mode = FeedbackMode::Overwrite;
  std::size_t repetitions = 0;
  std::vector<double> best_errors;
  std::vector<HandSample> tracked_path;
};

struct CommandOutcome {
  std::optional<FeedbackUpdate> feedback;
  std::optional<SessionSummary> summary;
};

/// Live state machine: Calibrating -> Selecting -> Executing -> Stopped.
///
/// Single writer. Samples must arrive in non-decreasing time order.
class Session {
 public:
  explicit Session(FeedbackConfig config = {});

  CommandOutcome apply(const Command& cmd);
  FeedbackUpdate process_sample(const HandSample& sample);

  Phase phase() const { return phase_; }
  const Frame& frame() const { return frame_; }
  const std::vector<Vec3>& calibration_points() const { return calibration_; }
  /// Trajectory as selected, before placement.
  const std::optional<Trajectory>& selected() const { return selected_; }
  /// Offset applied by Place/Move; z is always 0.
  const Vec3& placement() const { return placement_; }
  /// The selected trajectory moved to its placed position.
  Trajectory placed_trajectory() const;
  ConfidenceInterval ci() const { return ci_; }
  FeedbackMode mode() const { return mode_; }
  const TunnelState& tunnel() const { return tunnel_; }
  const std::vector<HandSample>& tracked_path() const { return tracked_; }
  std::size_t repetitions() const { return repetitions_; }
  const FeedbackConfig& config() const { return config_; }

  SessionSummary summary() const;

 private:
  void require(Phase expected, std::string_view what) const;

  CommandOutcome on(const command::Calibrate& c);
  CommandOutcome on(const command::SelectTrajectory& c);
  CommandOutcome on(const command::PlaceMove& c);
  CommandOutcome on(const command::SetCI& c);
  CommandOutcome on(const command::Start& c);
  CommandOutcome on(const command::Stop& c);
  CommandOutcome on(const command::SetMode& c);
  CommandOutcome on(const command::ResetTunnel& c);

  FeedbackConfig config_;
  Phase phase_ = Phase::Calibrating;
  std::vector<Vec3> calibration_;
  Frame frame_;
  std::optional<Trajectory> selected_;
  Vec3 placement_ = Vec3::Zero();
  ConfidenceInterval ci_ = ConfidenceInterval::C1;
  FeedbackMode mode_ = FeedbackMode::Overwrite;

  // Valid while executing or stopped.
  Trajectory active_;
  SpatialIndex index_;
  TunnelState tunnel_;
  std::vector<HandSample> tracked_;
  std::size_t repetitions_ = 0;
  bool left_start_ = false;
};

/// Turns a clinician's hand recording into a trajectory.
///
/// Samples are smoothed with a centred moving average of `smooth_window`
/// samples (the window shrinks symmetrically near the ends so both endpoints
/// are kept) and then resampled at `spacing`.
Trajectory record_demonstration(const std::vector<HandSample>& samples, double spacing,
                                std::size_t smooth_window = 5, std::string author = "clinician",
                                std::string id = "demonstration");

}  // namespace kinetunnel
