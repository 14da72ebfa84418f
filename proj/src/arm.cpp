#include "canopy_reach/arm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace canopy_reach {
namespace {

Eigen::Isometry3d dhTransform(const DhParameters& p, double theta) {
  const double ct = std::cos(theta + p.thetaOffset);
  const double st = std::sin(theta + p.thetaOffset);
  const double ca = std::cos(p.alpha);
  const double sa = std::sin(p.alpha);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, p.a * ct,
       st, ct * ca, -ct * sa, p.a * st,
       0.0, sa, ca, p.d,
       0.0, 0.0, 0.0, 1.0;
  return Eigen::Isometry3d(m);
}

void checkDimension(const ArmModel& model, const Vector& q) {
  if (q.size() != model.dof()) {
    throw std::invalid_argument("arm: joint vector has " + std::to_string(q.size()) +
                                " entries, model has " + std::to_string(model.dof()));
  }
}

Eigen::Isometry3d baseTransform(const ArmModel& model) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = model.baseRotation;
  t.translation() = model.basePosition;
  return t;
}

}  // namespace

void validateArmModel(const ArmModel& model) {
  if (model.dof() < 3) throw std::invalid_argument("arm: need at least 3 joints");
  if (model.limits.size() != model.dh.size()) {
    throw std::invalid_argument("arm: jointLimits must have one entry per joint");
  }
  for (const auto& l : model.limits) {
    if (!(l.lower < l.upper)) throw std::invalid_argument("arm: joint limit lower >= upper");
  }
}

Pose forwardKinematics(const ArmModel& model, const Vector& q) {
  checkDimension(model, q);
  Eigen::Isometry3d t = baseTransform(model);
  for (int i = 0; i < model.dof(); ++i) t = t * dhTransform(model.dh[i], q(i));
  return {t.translation(), t.linear() * model.toolRotation};
}

Matrix jacobian(const ArmModel& model, const Vector& q) {
  checkDimension(model, q);
  const int b = model.dof();
  std::vector<Vec3> z(b), p(b);
  Eigen::Isometry3d t = baseTransform(model);
  for (int i = 0; i < b; ++i) {
    z[i] = t.linear().col(2);
    p[i] = t.translation();
    t = t * dhTransform(model.dh[i], q(i));
  }
  const Vec3 pe = t.translation();
  Matrix j(3, b);
  for (int i = 0; i < b; ++i) j.col(i) = z[i].cross(pe - p[i]);
  return j;
}

RrmcResult rrmcStep(const ArmModel& model, const Vector& q, const Vec3& vDesired, double dt,
                    double pinvTolerance) {
  if (!(dt > 0.0)) throw std::invalid_argument("rrmcStep: dt must be > 0");
  const Matrix j = jacobian(model, q);
  const Vector qdot = pseudoinverse(j, pinvTolerance) * vDesired;

  RrmcResult r;
  r.q = q + qdot * dt;
  for (int i = 0; i < model.dof(); ++i) {
    const auto& lim = model.limits[i];
    if (r.q(i) < lim.lower || r.q(i) > lim.upper) {
      r.q(i) = std::clamp(r.q(i), lim.lower, lim.upper);
      r.saturated = true;
    }
  }
  r.trackingError = (j * ((r.q - q) / dt) - vDesired).norm();
  return r;
}

Vec3 pointMassStep(const Vec3& x, const Vec3& v, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pointMassStep: dt must be > 0");
  return x + v * dt;
}

ArmModel referenceArm() {
  constexpr double pi = std::numbers::pi;
  ArmModel m;
  m.dh = {
      {0.0, pi / 2, 0.089159, 0.0},   {-0.425, 0.0, 0.0, 0.0},
      {-0.39225, 0.0, 0.0, 0.0},      {0.0, pi / 2, 0.10915, 0.0},
      {0.0, -pi / 2, 0.09465, 0.0},   {0.0, 0.0, 0.0823, 0.0},
  };
  m.limits.assign(6, JointLimit{-2.0 * pi, 2.0 * pi});
  m.toolRotation = forwardKinematics(m, referenceArmHome()).rotation.transpose();
  return m;
}

Vector referenceArmHome() {
  constexpr double pi = std::numbers::pi;
  Vector q(6);
  q << 0.0, -0.6 * pi, 0.55 * pi, -0.45 * pi, -0.5 * pi, 0.0;
  return q;
}

Vector solvePositionIk(const ArmModel& model, const Vector& seed, const Vec3& target,
                       int maxIterations, double* residual) {
  Vector q = seed;
  double err = (forwardKinematics(model, q).position - target).norm();
  for (int it = 0; it < maxIterations && err > 1e-10; ++it) {
    const Vec3 e = target - forwardKinematics(model, q).position;
    const Matrix j = jacobian(model, q);
    Vector dq = pseudoinverse(j, 1e-4) * e;
    const double maxStep = dq.lpNorm<Eigen::Infinity>();
    if (maxStep > 0.2) dq *= 0.2 / maxStep;
    q += dq;
    for (int i = 0; i < model.dof(); ++i) {
      q(i) = std::clamp(q(i), model.limits[i].lower, model.limits[i].upper);
    }
    err = (forwardKinematics(model, q).position - target).norm();
  }
  if (residual) *residual = err;
  return q;
}

}  // namespace canopy_reach
