#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "canopy_reach/numerics.hpp"

namespace canopy_reach {

enum class CrossSection { circular, square };

/// Young's modulus used to derive joint stiffness from cross-section (Pa).
inline constexpr double kBalsaYoungsModulus = 3.0e9;
inline constexpr double kDefaultBreakAngle = 0.35;
inline constexpr int kDefaultRelaxIterations = 50;
inline constexpr double kDefaultRelaxStepGain = 1.0;

struct LeafSpec {
  int attachParticleIndex = 0;
  double petioleStiffness = 0.02;            // N·m/rad
  std::array<double, 2> patchHalfExtents{};  // along the outward axis, across
  Vec3 patchNormal = Vec3::UnitX();
};

/// One balsa-like branch: a chain of particleCount particles joined by
/// two-axis bending joints, fixed to a mounting frame through an external
/// joint. The rest axis is the attachment z-axis tilted by orientationDeg
/// about the world x-axis (positive tilts toward +y).
struct BranchSpec {
  CrossSection crossSection = CrossSection::circular;
  double dimension = 0.01;  // diameter or side length (m)
  double length = 0.3;
  int particleCount = 6;
  Vec3 attachmentPosition = Vec3::Zero();
  Vec3 attachmentRpy = Vec3::Zero();
  double orientationDeg = 0.0;
  double externalJointStiffness = 5.0;  // N·m/rad
  double internalJointStiffness = 0.0;  // N·m/rad; <= 0 means derive from section
  double breakAngle = kDefaultBreakAngle;
  std::vector<LeafSpec> leaves;

  double linkLength() const { return length / (particleCount - 1); }
  double radius() const { return 0.5 * dimension; }
};

/// Second moment of area of the cross-section (m^4).
double secondMomentOfArea(CrossSection section, double dimension);

/// κ = E·I/ℓ for one internal bending joint.
double bendingStiffness(CrossSection section, double dimension, double linkLength,
                        double youngsModulus = kBalsaYoungsModulus);

/// Internal stiffness actually used for a spec (explicit value or derived).
double effectiveInternalStiffness(const BranchSpec& spec);

/// Throws std::invalid_argument naming the offending field.
void validateBranchSpec(const BranchSpec& spec);

/// Immutable geometry shared by every state of one canopy.
struct BranchModel {
  BranchSpec spec;
  Mat3 restRotation;             // attachment frame, z along the rest axis
  std::vector<double> stiffness;  // per angle DoF (branch joints, then leaves)
  std::vector<Mat3> leafRelativeRotation;
  Vec3 restTip;
};

struct CanopyModel {
  std::vector<BranchModel> branches;
  std::uint64_t seed = 0;
};

struct BranchState {
  /// Two bending angles per joint: joint 0 is the external (mount) joint,
  /// joint 1+i sits at the base of link i.
  std::vector<double> jointAngles;
  std::vector<double> leafAngles;  // two per leaf
  std::vector<Vec3> particlePositions;
  std::vector<Mat3> linkRotations;  // one per link, z along the link
  bool broken = false;
  double maxTipDeviation = 0.0;

  const Vec3& tip() const { return particlePositions.back(); }
};

/// Value type: operations take a state and return a new one. The model is
/// immutable and shared between copies.
struct CanopyState {
  std::shared_ptr<const CanopyModel> model;
  std::vector<BranchState> branches;

  std::size_t size() const { return branches.size(); }
  bool empty() const { return branches.empty(); }
  const BranchModel& branchModel(std::size_t i) const { return model->branches[i]; }
};

/// Reaction load on the plant. With stiffness == 0 the force is constant
/// during relaxation. With stiffness > 0 it is a unilateral penalty spring
/// along `normal` (surface toward the contacting taxel) whose initial force
/// is `force`; it releases when the surface moves clear.
struct ContactLoad {
  int branchIndex = 0;
  int linkIndex = 0;
  int leafIndex = -1;  // >= 0 when the load acts on a leaf patch
  Vec3 point = Vec3::Zero();
  Vec3 force = Vec3::Zero();
  double stiffness = 0.0;
  Vec3 normal = Vec3::Zero();
};

struct SurfaceQuery {
  int branchIndex = -1;
  int linkIndex = -1;
  int leafIndex = -1;
  Vec3 point = Vec3::Zero();
  double distance = 0.0;  // to the surface; <= 0 inside a capsule
  Vec3 normal = Vec3::Zero();
};

CanopyState buildCanopy(std::span<const BranchSpec> specs, std::uint64_t seed);

/// Canopy with no branches (free space).
CanopyState emptyCanopy();

/// Quasi-static relaxation: damped Gauss–Newton descent on
///   E = Σ ½κθ² − Σ F·δ   (+ penalty springs for stiff loads)
/// over the joint angles of every unbroken branch touched by a load or away
/// from rest. Each accepted iteration does not increase E. Branches whose
/// joint bending exceeds breakAngle are marked broken and frozen.
/// If energyTrace is given, it receives E before the first iteration and
/// after each one, summed over branches.
CanopyState relaxDeformation(const CanopyState& state, std::span<const ContactLoad> loads,
                             int iterations = kDefaultRelaxIterations,
                             double stepGain = kDefaultRelaxStepGain,
                             std::vector<double>* energyTrace = nullptr);

/// Nearest surface point over all link capsules and leaf patches; nullopt for
/// an empty canopy.
std::optional<SurfaceQuery> closestPointOnCanopy(const CanopyState& state, const Vec3& query);

double tipDeviation(const CanopyState& state, std::size_t branch);

/// Σ over branches of the running maximum tip deviation.
double totalDisturbance(const CanopyState& state);

/// World rotation and origin of a leaf patch (x outward, y across, z normal).
struct LeafFrame {
  Vec3 origin;
  Mat3 rotation;
};
LeafFrame leafFrame(const CanopyState& state, std::size_t branch, std::size_t leaf);

/// Recompute particle positions and link rotations from the stored angles.
void updateBranchKinematics(const BranchModel& model, BranchState& branch);

}  // namespace canopy_reach
