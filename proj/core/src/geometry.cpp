#include "kinetunnel/geometry.hpp"

#include "kinetunnel/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

namespace kinetunnel {

namespace {

constexpr double kCoincidentTolerance = 1e-6;
constexpr double kMinTriangleArea = 1e-9;

bool finite(const Vec3& p) { return p.allFinite(); }

std::string upper(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

}  // namespace

Frame frame_from_three_points(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  if (!finite(p1) || !finite(p2) || !finite(p3)) {
    throw Error(ErrorCode::InvalidArgument, "calibration point is not finite");
  }
  if ((p2 - p1).norm() < kCoincidentTolerance || (p3 - p1).norm() < kCoincidentTolerance ||
      (p3 - p2).norm() < kCoincidentTolerance) {
    throw Error(ErrorCode::CoincidentPoints, "two calibration points coincide");
  }
  const Vec3 e1 = p2 - p1;
  const Vec3 normal = e1.cross(p3 - p1);
  if (0.5 * normal.norm() < kMinTriangleArea) {
    throw Error(ErrorCode::CollinearPoints, "calibration points are collinear");
  }

  Frame frame;
  frame.origin = p1;
  const Vec3 x = e1.normalized();
  const Vec3 z = normal.normalized();
  frame.axes.col(0) = x;
  frame.axes.col(1) = z.cross(x);
  frame.axes.col(2) = z;
  return frame;
}

Vec3 transform_point(const Frame& frame, const Vec3& p, Direction direction) {
  if (direction == Direction::WorldToLocal) {
    return frame.axes.transpose() * (p - frame.origin);
  }
  return frame.origin + frame.axes * p;
}

double diameter(ConfidenceInterval ci) noexcept {
  switch (ci) {
    case ConfidenceInterval::C1: return 0.10;
    case ConfidenceInterval::C2: return 0.065;
    case ConfidenceInterval::C3: return 0.03;
  }
  return 0.10;
}

std::string_view to_string(ConfidenceInterval ci) noexcept {
  switch (ci) {
    case ConfidenceInterval::C1: return "C1";
    case ConfidenceInterval::C2: return "C2";
    case ConfidenceInterval::C3: return "C3";
  }
  return "C1";
}

ConfidenceInterval parse_confidence_interval(std::string_view text) {
  const std::string key = upper(text);
  if (key == "C1") return ConfidenceInterval::C1;
  if (key == "C2") return ConfidenceInterval::C2;
  if (key == "C3") return ConfidenceInterval::C3;
  throw Error(ErrorCode::InvalidArgument, "unknown confidence interval '" + std::string(text) + "'");
}

bool Trajectory::closed() const {
  return via_points.size() >= 2 && (via_points.back() - via_points.front()).norm() <= spacing;
}

bool Trajectory::operator==(const Trajectory& other) const {
  if (id != other.id || spacing != other.spacing || metadata != other.metadata ||
      via_points.size() != other.via_points.size()) {
    return false;
  }
  for (std::size_t i = 0; i < via_points.size(); ++i) {
    if (via_points[i] != other.via_points[i]) return false;
  }
  return true;
}

double arc_length(std::span<const Vec3> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    total += (points[i] - points[i - 1]).norm();
  }
  return total;
}

Vec3 point_at_arc_length(std::span<const Vec3> points, double s) {
  if (points.empty()) {
    throw Error(ErrorCode::DegeneratePath, "empty polyline");
  }
  if (s <= 0.0) return points.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double seg = (points[i] - points[i - 1]).norm();
    if (seg > 0.0 && walked + seg >= s) {
      const double t = (s - walked) / seg;
      return points[i - 1] + t * (points[i] - points[i - 1]);
    }
    walked += seg;
  }
  return points.back();
}

std::vector<Vec3> resample_polyline(std::span<const Vec3> points, double spacing) {
  if (points.size() < 2) {
    throw Error(ErrorCode::DegeneratePath, "polyline needs at least two points");
  }
  if (!(spacing > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  }
  for (const auto& p : points) {
    if (!finite(p)) throw Error(ErrorCode::InvalidArgument, "polyline point is not finite");
  }

  std::vector<double> cumulative(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
  }
  const double total = cumulative.back();
  if (total < spacing) {
    throw Error(ErrorCode::DegeneratePath, "path is shorter than one spacing");
  }

  const auto intervals = static_cast<std::size_t>(std::max(1.0, std::round(total / spacing)));
  const double step = total / static_cast<double>(intervals);

  std::vector<Vec3> out;
  out.reserve(intervals + 1);
  out.push_back(points.front());
  std::size_t seg = 1;
  for (std::size_t k = 1; k < intervals; ++k) {
    const double s = step * static_cast<double>(k);
    while (seg + 1 < points.size() && cumulative[seg] < s) ++seg;
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double t = len > 0.0 ? (s - cumulative[seg - 1]) / len : 0.0;
    out.push_back(points[seg - 1] + std::clamp(t, 0.0, 1.0) * (points[seg] - points[seg - 1]));
  }
  out.push_back(points.back());
  return out;
}

Trajectory translated_in_plane(const Trajectory& trajectory, const Vec3& offset) {
  const Vec3 planar(offset.x(), offset.y(), 0.0);
  Trajectory moved = trajectory;
  for (auto& p : moved.via_points) p += planar;
  return moved;
}

std::string_view to_string(Exercise exercise) noexcept {
  switch (exercise) {
    case Exercise::T1: return "T1";
    case Exercise::T2: return "T2";
    case Exercise::T3: return "T3";
    case Exercise::T4: return "T4";
  }
  return "T1";
}

Exercise parse_exercise(std::string_view text) {
  const std::string key = upper(text);
  if (key == "T1") return Exercise::T1;
  if (key == "T2") return Exercise::T2;
  if (key == "T3") return Exercise::T3;
  if (key == "T4") return Exercise::T4;
  throw Error(ErrorCode::InvalidArgument, "unknown exercise '" + std::string(text) + "'");
}

Trajectory generate_exercise(Exercise exercise, const ExerciseParams& params) {
  if (!(params.reach > 0.0) || !(params.circle_radius > 0.0) || !(params.spacing > 0.0) ||
      params.table_height < 0.0 || params.shoulder_height < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "exercise dimensions must be positive");
  }

  Trajectory traj;
  traj.id = std::string(to_string(exercise));
  traj.spacing = params.spacing;
  traj.metadata.author = "library";
  traj.metadata.exercise = traj.id;

  const Vec3 table_start = params.start_point + Vec3(0.0, 0.0, params.table_height);
  const Vec3 shoulder_start = params.start_point + Vec3(0.0, 0.0, params.shoulder_height);

  auto straight = [&](const Vec3& from, const Vec3& heading) {
    const Vec3 ends[] = {from, from + params.reach * heading};
    return resample_polyline(ends, params.spacing);
  };

  switch (exercise) {
    case Exercise::T1:
      traj.via_points = straight(table_start, Vec3(-1.0, 0.0, 0.0));
      break;
    case Exercise::T2:
      traj.via_points = straight(shoulder_start, Vec3(-1.0, 0.0, 0.0));
      break;
    case Exercise::T3:
      traj.via_points = straight(shoulder_start, Vec3(0.0, 1.0, 0.0));
      break;
    case Exercise::T4: {
      // The start is the point of the circle nearest the patient; seen from
      // above, clockwise motion heads to the patient's left first.
      const double r = params.circle_radius;
      const Vec3 center = table_start + Vec3(0.0, r, 0.0);
      const double circumference = 2.0 * std::numbers::pi * r;
      const auto n = static_cast<std::size_t>(std::max(3.0, std::round(circumference / params.spacing)));
      traj.via_points.reserve(n + 1);
      for (std::size_t k = 0; k < n; ++k) {
        const double theta = -std::numbers::pi / 2.0 -
                             2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        traj.via_points.push_back(center + r * Vec3(std::cos(theta), std::sin(theta), 0.0));
      }
      traj.via_points.front() = table_start;
      traj.via_points.push_back(table_start);
      break;
    }
  }
  return traj;
}

}  // namespace kinetunnel
