#include "canopy_reach/reference_scenarios.hpp"

#include <numbers>
#include <random>
#include <string>

namespace canopy_reach {
namespace {

// Upright branch rising through z = 0 at (x, y), mounted `below` under the
// travel plane.
BranchSpec upright(double x, double y, double dimension, double mountStiffness,
                   double length = 0.3, double below = 0.15) {
  BranchSpec b;
  b.dimension = dimension;
  b.length = length;
  b.particleCount = 6;
  b.attachmentPosition = Vec3(x, y, -below);
  b.externalJointStiffness = mountStiffness;
  return b;
}

// Branch hanging down through z = 0 from a mount above.
BranchSpec hanging(double x, double y, double dimension, double mountStiffness,
                   double length = 0.3, double above = 0.15) {
  BranchSpec b = upright(x, y, dimension, mountStiffness, length, 0.0);
  b.attachmentPosition = Vec3(x, y, above);
  b.attachmentRpy = Vec3(std::numbers::pi, 0.0, 0.0);
  return b;
}

Scenario base(std::string name, std::vector<std::string> tags, Vec3 target) {
  Scenario s;
  s.name = std::move(name);
  s.tags = std::move(tags);
  s.initialPosition = Vec3::Zero();
  s.target = target;
  s.maxDuration = 60.0;
  return s;
}

// Mount boxes keep the gripper off the fixtures.
void addMountFrames(Scenario& s) {
  s.mountingFrames.clear();
  for (const auto& b : s.canopy) {
    const Vec3 half(0.01, 0.01, 0.01);
    s.mountingFrames.push_back({b.attachmentPosition - half, b.attachmentPosition + half});
  }
}

}  // namespace

Scenario withController(Scenario s, ControllerKind kind) {
  s.controller.kind = kind;
  return s;
}

Scenario withReferenceArm(Scenario s) {
  ArmSetup arm;
  arm.model = referenceArm();
  arm.initialJoints = referenceArmHome();
  const Vec3 home = forwardKinematics(arm.model, arm.initialJoints).position;
  arm.model.basePosition = s.initialPosition - home;
  s.arm = arm;
  return s;
}

Scenario referenceBlockingScenario() {
  Scenario s = base("blocking-medium", {"blocking", "stiff"}, Vec3(0.16, 0.0, 0.0));
  s.canopy.push_back(upright(0.08, 0.006, 0.015, 5.0));
  addMountFrames(s);
  return s;
}

std::vector<Scenario> referenceSuite() {
  std::vector<Scenario> out;
  out.push_back(referenceBlockingScenario());
  {
    Scenario s = base("thin-offset", {"blocking"}, Vec3(0.16, 0.0, 0.0));
    s.canopy.push_back(upright(0.08, 0.012, 0.008, 5.0));
    out.push_back(s);
  }
  {
    Scenario s = base("square-stiff", {"blocking", "stiff"}, Vec3(0.16, 0.0, 0.0));
    BranchSpec b = upright(0.07, -0.008, 0.012, 5.0);
    b.crossSection = CrossSection::square;
    s.canopy.push_back(b);
    out.push_back(s);
  }
  {
    Scenario s = base("hanging-thick", {"blocking", "stiff"}, Vec3(0.15, 0.0, 0.0));
    s.canopy.push_back(hanging(0.08, -0.006, 0.02, 10.0));
    out.push_back(s);
  }
  {
    Scenario s = base("tilted", {"blocking"}, Vec3(0.16, 0.0, 0.0));
    BranchSpec b = upright(0.08, 0.05, 0.01, 5.0);
    b.orientationDeg = -15.0;
    s.canopy.push_back(b);
    out.push_back(s);
  }
  {
    Scenario s = base("diagonal", {"blocking"}, Vec3(0.14, 0.06, 0.0));
    s.canopy.push_back(upright(0.07, 0.036, 0.01, 5.0));
    out.push_back(s);
  }
  {
    Scenario s = base("leafy", {}, Vec3(0.16, 0.0, 0.0));
    BranchSpec b = upright(0.08, 0.03, 0.006, 3.0, 0.3, 0.12);
    LeafSpec leaf;
    leaf.attachParticleIndex = 2;
    leaf.patchHalfExtents = {0.02, 0.01};
    leaf.patchNormal = Vec3::UnitX();
    b.leaves.push_back(leaf);
    s.canopy.push_back(b);
    out.push_back(s);
  }
  {
    Scenario s = base("two-branch", {"blocking", "multi"}, Vec3(0.18, 0.0, 0.0));
    s.canopy.push_back(upright(0.06, 0.008, 0.008, 5.0));
    s.canopy.push_back(upright(0.12, -0.008, 0.01, 5.0));
    out.push_back(s);
  }
  {
    Scenario s = base("two-branch-stiff", {"blocking", "stiff", "multi"}, Vec3(0.18, 0.0, 0.0));
    s.canopy.push_back(upright(0.06, -0.006, 0.015, 5.0));
    s.canopy.push_back(hanging(0.12, 0.008, 0.015, 5.0));
    out.push_back(s);
  }
  {
    Scenario s = base("two-branch-leafy", {"blocking", "multi"}, Vec3(0.18, 0.0, 0.0));
    BranchSpec a = upright(0.06, 0.01, 0.008, 4.0);
    LeafSpec leaf;
    leaf.attachParticleIndex = 3;
    leaf.patchHalfExtents = {0.015, 0.008};
    a.leaves.push_back(leaf);
    s.canopy.push_back(a);
    s.canopy.push_back(upright(0.13, -0.01, 0.01, 5.0));
    out.push_back(s);
  }
  for (auto& s : out) addMountFrames(s);
  return out;
}

std::vector<Scenario> repetitionScenarios() {
  std::vector<Scenario> suite = referenceSuite();
  return {suite[0], suite[1], suite[3], suite[7], suite[8]};
}

Scenario denseRandomScenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  Scenario s = base("dense-" + std::to_string(seed), {"multi"}, Vec3(0.2, 0.0, 0.0));
  s.seed = seed;
  const int count = 8 + static_cast<int>(rng() % 8);
  for (int i = 0; i < count; ++i) {
    const bool up = (rng() & 1U) != 0;
    const double x = uniform(0.04, 0.18);
    const double y = uniform(-0.12, 0.12);
    BranchSpec b = up ? upright(x, y, uniform(0.004, 0.008), uniform(2.0, 6.0))
                      : hanging(x, y, uniform(0.004, 0.008), uniform(2.0, 6.0));
    b.orientationDeg = uniform(-20.0, 20.0);
    LeafSpec leaf;
    leaf.attachParticleIndex = 2 + static_cast<int>(rng() % 3);
    leaf.patchHalfExtents = {uniform(0.01, 0.02), uniform(0.005, 0.01)};
    b.leaves.push_back(leaf);
    s.canopy.push_back(b);
  }
  addMountFrames(s);
  return s;
}

}  // namespace canopy_reach
