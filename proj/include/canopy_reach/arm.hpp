#pragma once

#include <vector>

#include "canopy_reach/numerics.hpp"

namespace canopy_reach {

/// Standard Denavit–Hartenberg row: Rz(θ + thetaOffset)·Tz(d)·Tx(a)·Rx(alpha).
struct DhParameters {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double thetaOffset = 0.0;
};

struct JointLimit {
  double lower = -3.141592653589793;
  double upper = 3.141592653589793;
};

/// Serial revolute arm. The end-effector frame is the last DH frame followed
/// by toolRotation (x forward, y lateral, z vertical to the gripper).
struct ArmModel {
  std::vector<DhParameters> dh;
  std::vector<JointLimit> limits;
  Vec3 basePosition = Vec3::Zero();
  Mat3 baseRotation = Mat3::Identity();
  Mat3 toolRotation = Mat3::Identity();

  int dof() const { return static_cast<int>(dh.size()); }
};

/// Throws std::invalid_argument if the model is unusable for 3-D tracking.
void validateArmModel(const ArmModel& model);

Pose forwardKinematics(const ArmModel& model, const Vector& q);

/// 3×b positional geometric Jacobian: column i = z_i × (p_ee − p_i).
Matrix jacobian(const ArmModel& model, const Vector& q);

struct RrmcResult {
  Vector q;
  bool saturated = false;     // a joint limit clamped the step
  double trackingError = 0.0; // ‖J·q̇ − v‖ predicted by the linear model (m/s)
};

/// One resolved-rate step: q̇ = J⁺·v, q' = clamp(q + q̇·dt).
RrmcResult rrmcStep(const ArmModel& model, const Vector& q, const Vec3& vDesired, double dt,
                    double pinvTolerance = 1e-4);

/// Integrates a free point mass: x + v·dt.
Vec3 pointMassStep(const Vec3& x, const Vec3& v, double dt);

/// Reference 6R arm (UR5-style DH) with the tool frame aligned to the world
/// axes at referenceArmHome().
ArmModel referenceArm();
Vector referenceArmHome();

/// Iterated damped resolved-rate solve for a joint vector reaching `target`.
/// Returns the best configuration found; `residual` receives its error.
Vector solvePositionIk(const ArmModel& model, const Vector& seed, const Vec3& target,
                       int maxIterations = 500, double* residual = nullptr);

}  // namespace canopy_reach
