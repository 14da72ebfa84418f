#pragma once

#include "canopy_reach/numerics.hpp"
#include "canopy_reach/tactile.hpp"

namespace canopy_reach {

inline constexpr double kDefaultSpeed = 0.01;  // m/s

struct RiceParams {
  double wx = 1.0;
  double wf = 2.0;
  double alpha = kDefaultSpeed;
  double noContactEps = 0.01;  // N, per-taxel force below which there is no contact
};

/// Admittance along x_EE, position control on y/z.
struct HybridParams {
  double desiredForce = 1.0;    // N
  double virtualMass = 100.0;
  double virtualDamping = 50.0;
  double alpha = kDefaultSpeed;
  double contactEps = 0.01;     // N, only used for the contact diagnostic
};

void validate(const RiceParams& p);
void validate(const HybridParams& p);

struct ControllerCommand {
  Vec3 v = Vec3::Zero();
  Vec3 targetGradient = Vec3::Zero();  // normalised ∇U
  Vec3 forceGradient = Vec3::Zero();   // normalised ∇G
  Vec3 combinedGradient = Vec3::Zero();  // ∇H
  bool contact = false;
};

/// Normalised gradient of ‖x_Target − x‖²; zero at the target.
Vec3 targetGradient(const Vec3& x, const Vec3& target);

struct ForceGradient {
  Vec3 direction = Vec3::Zero();
  bool contact = false;
};

/// Least-squares spatial gradient of the taxel force magnitudes around x_ref,
/// normalised. Zero without contact or with fewer than three usable rows.
ForceGradient forceGradient(const TactileWindow& window, double noContactEps = 0.01);

ControllerCommand riceStep(const Vec3& x, const Vec3& target, const TactileWindow& window,
                           const RiceParams& params);

ControllerCommand positionStep(const Vec3& x, const Vec3& target, double alpha);

struct HybridResult {
  ControllerCommand command;
  double admittanceVelocity = 0.0;
};

/// One step of the hybrid baseline. measuredForceX is the magnitude of the
/// net taxel force along x_EE; admittanceVelocity is the caller-owned
/// integrator state. eeRotation maps EE axes to world axes.
HybridResult hybridStep(const Vec3& x, const Vec3& target, double measuredForceX,
                        double admittanceVelocity, const HybridParams& params, double dt,
                        const Mat3& eeRotation = Mat3::Identity());

}  // namespace canopy_reach
