#pragma once

#include "kinetunnel/geometry.hpp"

#include <Eigen/Core>

#include <array>

namespace kinetunnel {

/// Joint angles in radians: shoulder abduction, shoulder flexion, shoulder
/// internal rotation, elbow flexion.
using JointVector = Eigen::Vector4d;

struct JointLimits {
  JointVector lower{-1.5707963267948966, -1.5707963267948966, -1.5707963267948966, 0.0};
  JointVector upper{1.5707963267948966, 1.5707963267948966, 1.5707963267948966, 2.6};

  bool contains(const JointVector& q, double slack = 0.0) const;
  JointVector clamp(const JointVector& q) const;
};

/// Four-joint arm: three intersecting shoulder axes and one elbow axis.
///
/// Zero pose hangs the arm straight down (-z). Abduction turns about +y
/// (positive swings the arm towards -x), flexion about +x (positive swings
/// forward, +y), internal rotation about the upper-arm axis and elbow flexion
/// about the rotated x axis.
struct ArmGeometry {
  double upper_arm_length = 0.30;
  double forearm_length = 0.25;
  Vec3 shoulder_origin = Vec3::Zero();
  JointLimits limits;
};

struct ArmPose {
  Vec3 elbow;
  Vec3 hand;
};

/// Hand-centroid position. Throws JointLimit when q is outside the limits.
Vec3 forward_kinematics(const ArmGeometry& g, const JointVector& q);
/// Same chain without the limit check; also returns the elbow.
ArmPose arm_pose(const ArmGeometry& g, const JointVector& q);
/// 3x4 positional Jacobian of the hand.
Eigen::Matrix<double, 3, 4> hand_jacobian(const ArmGeometry& g, const JointVector& q);

struct IkOptions {
  double damping = 0.05;
  double max_step = 0.2;
  int max_iterations = 200;
  double tolerance = 1e-4;
};

struct IkResult {
  JointVector q;
  int iterations = 0;
  double residual = 0.0;
};

/// Damped-least-squares inverse kinematics from `seed`, clamped to the limits.
///
/// Throws Unreachable when the target lies outside the reach annulus and
/// NoConvergence when the residual is still above tolerance after
/// `max_iterations`.
IkResult solve_ik(const ArmGeometry& g, const Vec3& target, const JointVector& seed,
                  const IkOptions& options = {});

inline JointVector inverse_kinematics(const ArmGeometry& g, const Vec3& target,
                                      const JointVector& seed, const IkOptions& options = {}) {
  return solve_ik(g, target, seed, options).q;
}

}  // namespace kinetunnel
