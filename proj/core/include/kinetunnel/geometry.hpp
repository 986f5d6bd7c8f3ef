#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kinetunnel {

/// Position in meters. The engine is SI-internal; centimeters only appear at I/O.
using Vec3 = Eigen::Vector3d;

/// Calibrated working-plane coordinate system.
///
/// Columns of `axes` are the local x, y, z directions expressed in world
/// coordinates. The local z axis is the plane normal.
struct Frame {
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();

  Vec3 plane_normal() const { return axes.col(2); }

  static Frame identity() { return {}; }
};

enum class Direction { WorldToLocal, LocalToWorld };

/// Builds the calibration frame from three demonstrated points.
///
/// p1 becomes the origin, p1->p2 the x axis and the triangle normal the z
/// axis. Throws CoincidentPoints when two points are closer than 1e-6 m and
/// CollinearPoints when the triangle area is below 1e-9 m^2.
Frame frame_from_three_points(const Vec3& p1, const Vec3& p2, const Vec3& p3);

Vec3 transform_point(const Frame& frame, const Vec3& p, Direction direction);

inline Vec3 to_local(const Frame& frame, const Vec3& world) {
  return transform_point(frame, world, Direction::WorldToLocal);
}
inline Vec3 to_world(const Frame& frame, const Vec3& local) {
  return transform_point(frame, local, Direction::LocalToWorld);
}

/// Tunnel diameter choices offered to the patient.
enum class ConfidenceInterval { C1, C2, C3 };

/// Diameter in meters: 0.10, 0.065 and 0.03.
double diameter(ConfidenceInterval ci) noexcept;
/// Allowed deviation from the centerline, i.e. half the diameter.
inline double allowed_radius(ConfidenceInterval ci) noexcept { return diameter(ci) / 2.0; }

std::string_view to_string(ConfidenceInterval ci) noexcept;
/// Accepts "C1".."C3" in either case. Throws InvalidArgument otherwise.
ConfidenceInterval parse_confidence_interval(std::string_view text);

struct TrajectoryMetadata {
  std::string author;
  std::string created;
  std::string exercise;

  bool operator==(const TrajectoryMetadata&) const = default;
};

/// Desired path as an ordered list of via-points in the calibrated frame.
struct Trajectory {
  std::string id;
  std::vector<Vec3> via_points;
  double spacing = 0.01;
  TrajectoryMetadata metadata;

  const Vec3& start_point() const { return via_points.front(); }
  /// A path is closed when it ends within one spacing of where it started.
  bool closed() const;

  bool operator==(const Trajectory& other) const;
};

inline constexpr double kDefaultSpacing = 0.01;

double arc_length(std::span<const Vec3> points);

/// Resamples a polyline at uniform arc length.
///
/// The number of intervals is round(length / spacing), so the realised step
/// is the closest value to `spacing` that divides the length evenly. Both
/// endpoints are kept and every output point lies on the input polyline.
std::vector<Vec3> resample_polyline(std::span<const Vec3> points, double spacing);

/// Point at arc length `s` along the polyline, clamped to its ends.
Vec3 point_at_arc_length(std::span<const Vec3> points, double s);

/// Shifts a trajectory within the calibrated plane. The vertical component
/// of `offset` is discarded.
Trajectory translated_in_plane(const Trajectory& trajectory, const Vec3& offset);

enum class Exercise { T1, T2, T3, T4 };

std::string_view to_string(Exercise exercise) noexcept;
Exercise parse_exercise(std::string_view text);

/// Dimensions of the built-in exercise library.
///
/// Local frame convention for the library: the patient sits on the -y side
/// facing +y, -x is their left, +z is up out of the table plane.
struct ExerciseParams {
  double reach = 0.30;
  double table_height = 0.0;
  double shoulder_height = 0.30;
  double circle_radius = 0.15;
  double spacing = kDefaultSpacing;
  Vec3 start_point = Vec3::Zero();
};

/// T1 table-level reach left, T2 shoulder-level reach left, T3 shoulder-level
/// reach forward, T4 clockwise table-level circle returning to the start.
Trajectory generate_exercise(Exercise exercise, const ExerciseParams& params = {});

}  // namespace kinetunnel
