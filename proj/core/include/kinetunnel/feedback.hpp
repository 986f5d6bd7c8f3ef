#pragma once

#include "kinetunnel/geometry.hpp"

#include <cstddef>
#include <limits>
#include <vector>

namespace kinetunnel {

/// Color channels on the 0..255 scale. Kept as doubles so the ramp is exact.
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  bool operator==(const Rgb&) const = default;
};

/// Visual constants of the tunnel. Loaded from the service config.
struct FeedbackConfig {
  double scale_min = 0.3;
  Rgb on_path{0.0, 100.0, 0.0};
  Rgb off_path{255.0, 0.0, 0.0};
  /// Radius of the sphere around the start point that marks repetition boundaries.
  double repetition_radius = 0.03;
  /// Fraction of the tunnel radius below which a follower stops correcting.
  double deadband_fraction = 0.2;
};

struct SphereLook {
  double scale = 1.0;
  Rgb color;

  bool operator==(const SphereLook&) const = default;
};

/// Maps a distance from the centerline onto sphere size and color.
///
/// With u = clamp(distance / (CI / 2), 0, 1) the scale goes linearly from
/// `scale_min` to 1 and the color from `on_path` to `off_path`. Any distance
/// at or beyond the tunnel radius gives a full-size pure `off_path` sphere.
SphereLook feedback_for_error(double distance, ConfidenceInterval ci,
                              const FeedbackConfig& config = {});

enum class FeedbackMode { Overwrite, ResetPerRep };

std::string_view to_string(FeedbackMode mode) noexcept;
FeedbackMode parse_feedback_mode(std::string_view text);

struct HandSample {
  double t_ms = 0.0;
  Vec3 pos = Vec3::Zero();
};

struct SphereChange {
  std::size_t index = 0;
  SphereLook look;

  bool operator==(const SphereChange&) const = default;
};

/// Per-sphere best error and derived appearance.
class TunnelState {
 public:
  TunnelState() = default;
  TunnelState(std::size_t spheres, ConfidenceInterval ci, const FeedbackConfig& config);

  /// Records an error at one sphere. Returns true when the sphere's look changed.
  bool record(std::size_t index, double error);
  /// Forgets all errors; every sphere goes back to full-size red.
  /// Appends the spheres whose look changed to `changes`.
  void reset(std::vector<SphereChange>* changes = nullptr);

  std::size_t size() const { return best_.size(); }
  double best_error(std::size_t index) const { return best_[index]; }
  const SphereLook& look(std::size_t index) const { return looks_[index]; }
  const std::vector<double>& best_errors() const { return best_; }

 private:
  ConfidenceInterval ci_ = ConfidenceInterval::C1;
  FeedbackConfig config_;
  std::vector<double> best_;
  std::vector<SphereLook> looks_;
};

struct FeedbackUpdate {
  double t_ms = 0.0;
  std::vector<SphereChange> changed;
  double current_error = 0.0;
  std::size_t nearest_index = 0;
  /// Via-point at nearest_index, local frame.
  Vec3 path_point = Vec3::Zero();
  std::size_t repetition = 0;
};

}  // namespace kinetunnel
