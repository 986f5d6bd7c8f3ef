#include "kinetunnel/arm_model.hpp"

#include "kinetunnel/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace kinetunnel {

namespace {

Eigen::Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Eigen::Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

}  // namespace

bool JointLimits::contains(const JointVector& q, double slack) const {
  return ((q.array() >= lower.array() - slack) && (q.array() <= upper.array() + slack)).all();
}

JointVector JointLimits::clamp(const JointVector& q) const { return q.cwiseMax(lower).cwiseMin(upper); }

ArmPose arm_pose(const ArmGeometry& g, const JointVector& q) {
  const Eigen::Matrix3d shoulder = rot_y(q[0]) * rot_x(q[1]) * rot_z(q[2]);
  const Vec3 upper(0.0, 0.0, -g.upper_arm_length);
  const Vec3 fore(0.0, 0.0, -g.forearm_length);
  ArmPose pose;
  pose.elbow = g.shoulder_origin + shoulder * upper;
  pose.hand = pose.elbow + shoulder * (rot_x(q[3]) * fore);
  return pose;
}

Vec3 forward_kinematics(const ArmGeometry& g, const JointVector& q) {
  if (!q.allFinite() || !g.limits.contains(q, 1e-12)) {
    throw Error(ErrorCode::JointLimit, "joint vector outside limits");
  }
  return arm_pose(g, q).hand;
}

Eigen::Matrix<double, 3, 4> hand_jacobian(const ArmGeometry& g, const JointVector& q) {
  const Eigen::Matrix3d r1 = rot_y(q[0]);
  const Eigen::Matrix3d r12 = r1 * rot_x(q[1]);
  const Eigen::Matrix3d r123 = r12 * rot_z(q[2]);
  const ArmPose pose = arm_pose(g, q);

  const Vec3 from_shoulder = pose.hand - g.shoulder_origin;
  Eigen::Matrix<double, 3, 4> j;
  j.col(0) = Vec3::UnitY().cross(from_shoulder);
  j.col(1) = (r1 * Vec3::UnitX()).cross(from_shoulder);
  j.col(2) = (r12 * Vec3::UnitZ()).cross(from_shoulder);
  j.col(3) = (r123 * Vec3::UnitX()).cross(pose.hand - pose.elbow);
  return j;
}

IkResult solve_ik(const ArmGeometry& g, const Vec3& target, const JointVector& seed,
                  const IkOptions& options) {
  if (!target.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "IK target is not finite");
  }
  const double reach = (target - g.shoulder_origin).norm();
  const double inner = std::abs(g.upper_arm_length - g.forearm_length);
  const double outer = g.upper_arm_length + g.forearm_length;
  if (reach < inner || reach > outer) {
    throw Error(ErrorCode::Unreachable, "IK target outside the reach annulus");
  }

  IkResult result;
  result.q = g.limits.clamp(seed);
  // Iterate past the acceptance tolerance; the extra digits are nearly free.
  const double converge = options.tolerance * 1e-3;
  const double lambda2 = options.damping * options.damping;
  for (;;) {
    const Vec3 error = target - arm_pose(g, result.q).hand;
    result.residual = error.norm();
    if (result.residual < converge || result.iterations >= options.max_iterations) break;

    const Eigen::Matrix<double, 3, 4> jac = hand_jacobian(g, result.q);
    const Eigen::Matrix3d jjt = jac * jac.transpose() + lambda2 * Eigen::Matrix3d::Identity();
    JointVector step = jac.transpose() * jjt.ldlt().solve(error);
    const double largest = step.cwiseAbs().maxCoeff();
    if (largest > options.max_step) step *= options.max_step / largest;
    result.q = g.limits.clamp(result.q + step);
    ++result.iterations;
  }

  if (!(result.residual < options.tolerance)) {
    throw Error(ErrorCode::NoConvergence, "IK did not converge");
  }
  return result;
}

}  // namespace kinetunnel
