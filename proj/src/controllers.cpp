#include "canopy_reach/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace canopy_reach {
namespace {

constexpr double kZeroGradient = 1e-9;

}  // namespace

void validate(const RiceParams& p) {
  if (!(p.alpha > 0.0)) throw std::invalid_argument("rice: alpha must be > 0");
  if (p.wx < 0.0 || p.wf < 0.0) throw std::invalid_argument("rice: weights must be >= 0");
  if (p.wx == 0.0 && p.wf == 0.0) throw std::invalid_argument("rice: weights are both zero");
  if (p.noContactEps < 0.0) throw std::invalid_argument("rice: noContactEps must be >= 0");
}

void validate(const HybridParams& p) {
  if (!(p.virtualMass > 0.0)) throw std::invalid_argument("hybrid: virtualMass must be > 0");
  if (p.virtualDamping < 0.0) throw std::invalid_argument("hybrid: virtualDamping must be >= 0");
  if (!(p.alpha > 0.0)) throw std::invalid_argument("hybrid: alpha must be > 0");
}

Vec3 targetGradient(const Vec3& x, const Vec3& target) {
  return normalize(-2.0 * (target - x));
}

ForceGradient forceGradient(const TactileWindow& window, double noContactEps) {
  const Eigen::Index s = window.rows();
  ForceGradient out;
  if (s == 0) return out;

  const Eigen::VectorXd magnitude = window.forces.rowwise().norm();
  if (!(magnitude.maxCoeff() >= noContactEps)) return out;

  const double gRef = window.fRef.norm();
  Matrix d(s, 3);
  Vector dg(s);
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < s; ++i) {
    const Vec3 rel = window.positions.row(i).transpose() - window.xRef;
    const double len = rel.norm();
    if (!(len > 1e-12)) continue;  // taxel coincides with x_ref
    d.row(used) = (rel / len).transpose();
    dg(used) = magnitude(i) - gRef;
    ++used;
  }
  if (used < 3) return out;

  out.direction = normalize(solveNormalEquations(d.topRows(used), dg.head(used)));
  out.contact = true;
  return out;
}

ControllerCommand riceStep(const Vec3& x, const Vec3& target, const TactileWindow& window,
                           const RiceParams& params) {
  ControllerCommand cmd;
  cmd.targetGradient = targetGradient(x, target);
  const ForceGradient g = forceGradient(window, params.noContactEps);
  cmd.forceGradient = g.direction;
  cmd.contact = g.contact;
  cmd.combinedGradient = params.wx * cmd.targetGradient + params.wf * cmd.forceGradient;

  const double norm = cmd.combinedGradient.norm();
  if (norm >= kZeroGradient) cmd.v = -params.alpha * cmd.combinedGradient / norm;
  return cmd;
}

ControllerCommand positionStep(const Vec3& x, const Vec3& target, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("positionStep: alpha must be > 0");
  ControllerCommand cmd;
  cmd.targetGradient = targetGradient(x, target);
  cmd.combinedGradient = cmd.targetGradient;
  cmd.v = alpha * normalize(target - x);
  return cmd;
}

HybridResult hybridStep(const Vec3& x, const Vec3& target, double measuredForceX,
                        double admittanceVelocity, const HybridParams& params, double dt,
                        const Mat3& eeRotation) {
  if (!(dt > 0.0)) throw std::invalid_argument("hybridStep: dt must be > 0");

  const ControllerCommand pursuit = positionStep(x, target, params.alpha);
  const Vec3 pursuitEe = eeRotation.transpose() * pursuit.v;

  // m·v̇ + b·v = f_d − f along x_EE, integrated explicitly; the state is
  // bounded by the commanded speed.
  const double accel =
      (params.desiredForce - measuredForceX - params.virtualDamping * admittanceVelocity) /
      params.virtualMass;
  const double state =
      std::clamp(admittanceVelocity + accel * dt, -params.alpha, params.alpha);

  const double lateral2 = pursuitEe.y() * pursuitEe.y() + pursuitEe.z() * pursuitEe.z();
  const double xBound = std::sqrt(std::max(0.0, params.alpha * params.alpha - lateral2));
  const double vx = std::clamp(std::min(state, pursuitEe.x()), -xBound, xBound);

  HybridResult out;
  out.admittanceVelocity = state;
  out.command.targetGradient = pursuit.targetGradient;
  out.command.combinedGradient = pursuit.combinedGradient;
  out.command.contact = measuredForceX >= params.contactEps;
  out.command.v = eeRotation * Vec3(vx, pursuitEe.y(), pursuitEe.z());
  return out;
}

}  // namespace canopy_reach
