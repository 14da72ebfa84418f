#include <random>

#include "canopy_reach/arm.hpp"
#include "canopy_reach/controllers.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace canopy_reach;

namespace {

ArmModel planar3(double l1, double l2, double l3) {
  ArmModel m;
  m.dh = {{l1, 0, 0, 0}, {l2, 0, 0, 0}, {l3, 0, 0, 0}};
  m.limits.assign(3, JointLimit{});
  return m;
}

Vector randomJoints(std::mt19937_64& rng, const Vector& around, double spread) {
  Vector q = around;
  for (Eigen::Index i = 0; i < q.size(); ++i) q(i) += oracle::uniform(rng, -spread, spread);
  return q;
}

}  // namespace

TEST_CASE("forward kinematics examples") {
  const ArmModel m = planar3(0.3, 0.2, 0.1);
  CHECK((forwardKinematics(m, Vector::Zero(3)).position - Vec3(0.6, 0, 0)).norm() < 1e-12);

  Vector q = Vector::Zero(3);
  q(0) = std::numbers::pi / 2;
  CHECK((forwardKinematics(m, q).position - Vec3(0, 0.6, 0)).norm() < 1e-12);

  const ArmModel ur = referenceArm();
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector qi = randomJoints(rng, Vector::Zero(6), std::numbers::pi);
    CHECK((forwardKinematics(ur, qi).position - oracle::dhPosition(ur, qi)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(forwardKinematics(m, Vector::Zero(4)), std::invalid_argument);
}

TEST_CASE("reference arm home frame is aligned with the world axes") {
  const ArmModel ur = referenceArm();
  const Pose p = forwardKinematics(ur, referenceArmHome());
  CHECK((p.rotation - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("jacobian matches central finite differences") {
  const ArmModel ur = referenceArm();
  std::mt19937_64 rng(2);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vector q = randomJoints(rng, Vector::Zero(6), std::numbers::pi);
    const Matrix j = jacobian(ur, q);
    REQUIRE(j.rows() == 3);
    REQUIRE(j.cols() == 6);
    for (int c = 0; c < 6; ++c) {
      Vector qp = q, qm = q;
      qp(c) += h;
      qm(c) -= h;
      const Vec3 fd = (forwardKinematics(ur, qp).position - forwardKinematics(ur, qm).position) / (2 * h);
      CHECK((j.col(c) - fd).norm() < 1e-6);
    }
  }
}

TEST_CASE("jacobian matches the analytic planar 3R form") {
  const double l1 = 0.4, l2 = 0.3, l3 = 0.2;
  const ArmModel m = planar3(l1, l2, l3);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const Vector q = randomJoints(rng, Vector::Zero(3), std::numbers::pi);
    const double s1 = std::sin(q(0)), c1 = std::cos(q(0));
    const double s12 = std::sin(q(0) + q(1)), c12 = std::cos(q(0) + q(1));
    const double s123 = std::sin(q.sum()), c123 = std::cos(q.sum());
    Matrix expect(3, 3);
    expect << -l1 * s1 - l2 * s12 - l3 * s123, -l2 * s12 - l3 * s123, -l3 * s123,
        l1 * c1 + l2 * c12 + l3 * c123, l2 * c12 + l3 * c123, l3 * c123, 0, 0, 0;
    CHECK((jacobian(m, q) - expect).norm() < 1e-12);
  }
}

TEST_CASE("rrmcStep") {
  const ArmModel ur = referenceArm();
  const Vector q = referenceArmHome();

  const RrmcResult still = rrmcStep(ur, q, Vec3::Zero(), 0.01);
  CHECK(still.q == q);
  CHECK_FALSE(still.saturated);

  const Vec3 v(0.01, 0, 0);
  const RrmcResult step = rrmcStep(ur, q, v, 0.01);
  const Vec3 achieved =
      (forwardKinematics(ur, step.q).position - forwardKinematics(ur, q).position) / 0.01;
  CHECK((achieved - v).norm() < 1e-4);
  CHECK(step.trackingError < 1e-9);
}

TEST_CASE("rrmcStep stays finite at a singularity") {
  // Fully stretched planar arm: no velocity along the arm is possible.
  const ArmModel m = planar3(0.3, 0.2, 0.1);
  const RrmcResult r = rrmcStep(m, Vector::Zero(3), Vec3(0.01, 0.0, 0.0), 0.01);
  CHECK(r.q.allFinite());
  CHECK(r.trackingError == doctest::Approx(0.01).epsilon(1e-6));

  // Wrist singularity of the 6R arm (joint 5 at zero aligns joints 4 and 6).
  Vector q = referenceArmHome();
  q(4) = 0.0;
  const RrmcResult w = rrmcStep(referenceArm(), q, Vec3(0.0, 0.01, 0.01), 0.01);
  CHECK(w.q.allFinite());
  CHECK((w.q - q).norm() < 1.0);
}

TEST_CASE("rrmcStep clamps to joint limits") {
  ArmModel m = planar3(0.3, 0.2, 0.1);
  for (auto& l : m.limits) l = {-0.1, 0.1};
  const RrmcResult r = rrmcStep(m, Vector::Constant(3, 0.0999), Vec3(0.0, 1.0, 0.0), 0.01);
  CHECK(r.saturated);
  CHECK((r.q.array() <= 0.1).all());
}

TEST_CASE("pointMassStep") {
  CHECK((pointMassStep(Vec3::Zero(), Vec3(0.01, 0, 0), 0.01) - Vec3(1e-4, 0, 0)).norm() == 0.0);
  const Vec3 x(1, 2, 3);
  CHECK(pointMassStep(x, Vec3::Zero(), 0.01) == x);
  const Vec3 dir = Vec3(1, 2, -2).normalized();
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < 100; ++i) p = pointMassStep(p, 0.01 * dir, 0.01);
  CHECK(std::abs(p.norm() - 0.01) < 1e-12);
}

TEST_CASE("closed-loop position control reaches random targets") {
  const ArmModel ur = referenceArm();
  const Vector home = referenceArmHome();
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const Vec3 target = forwardKinematics(ur, randomJoints(rng, home, 0.3)).position;
    Vector q = home;
    bool reached = false;
    for (int step = 0; step < 20000 && !reached; ++step) {
      const Vec3 x = forwardKinematics(ur, q).position;
      if ((x - target).norm() <= 0.005) {
        reached = true;
        break;
      }
      q = rrmcStep(ur, q, positionStep(x, target, kDefaultSpeed).v, 0.01).q;
    }
    CHECK(reached);
  }
}

TEST_CASE("solvePositionIk") {
  const ArmModel ur = referenceArm();
  const Vec3 goal = forwardKinematics(ur, referenceArmHome()).position + Vec3(0.05, -0.03, 0.02);
  double residual = 1.0;
  const Vector q = solvePositionIk(ur, referenceArmHome(), goal, 500, &residual);
  CHECK(residual < 1e-9);
  CHECK((forwardKinematics(ur, q).position - goal).norm() < 1e-9);
}

TEST_CASE("validateArmModel") {
  ArmModel m = planar3(0.3, 0.2, 0.1);
  m.dh.pop_back();
  m.limits.pop_back();
  CHECK_THROWS_AS(validateArmModel(m), std::invalid_argument);
  m = planar3(0.3, 0.2, 0.1);
  m.limits[1] = {0.5, -0.5};
  CHECK_THROWS_AS(validateArmModel(m), std::invalid_argument);
}
