#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopy_reach/arm.hpp"
#include "canopy_reach/canopy.hpp"
#include "canopy_reach/controllers.hpp"
#include "canopy_reach/tactile.hpp"

namespace canopy_reach {

enum class ControllerKind { rice, position, hybrid };
enum class StopReason { target, stall, timeout, breakage, geometryViolation };

std::string toString(ControllerKind k);
std::string toString(StopReason r);
ControllerKind parseControllerKind(const std::string& s);
StopReason parseStopReason(const std::string& s);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::rice;
  double alpha = kDefaultSpeed;
  // RICE
  double wx = 1.0;
  double wf = 2.0;
  double noContactEps = 0.01;
  // hybrid
  double desiredForce = 1.0;
  double virtualMass = 100.0;
  double virtualDamping = 50.0;

  RiceParams rice() const { return {wx, wf, alpha, noContactEps}; }
  HybridParams hybrid() const { return {desiredForce, virtualMass, virtualDamping, alpha, noContactEps}; }
};

/// Axis-aligned box the end-effector and pads must stay out of.
struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct ArmSetup {
  ArmModel model;
  Vector initialJoints;
};

struct Scenario {
  std::string name = "scenario";
  std::vector<std::string> tags;  // e.g. "blocking", "stiff", "multi"
  std::vector<BranchSpec> canopy;
  std::optional<ArmSetup> arm;    // point-mass end-effector when empty
  Vec3 initialPosition = Vec3::Zero();
  Vec3 target = Vec3(0.3, 0.0, 0.0);
  ControllerConfig controller;
  double highRate = 50.0;   // f_H, Hz
  double lowRate = 100.0;   // f_L, Hz
  double maxDuration = 90.0;
  double targetTolerance = 0.005;
  int stallWindow = 100;    // high-level steps
  double stallEps = 0.001;
  bool stopOnBreakage = false;
  SensorGeometry sensor;
  int relaxIterations = kDefaultRelaxIterations;
  double relaxStepGain = kDefaultRelaxStepGain;
  std::vector<Box> mountingFrames;
  std::uint64_t seed = 0;

  bool hasTag(const std::string& t) const;
};

/// j = f_L / f_H; throws unless it is a positive integer.
int lowStepsPerHighStep(const Scenario& s);

/// Throws std::invalid_argument naming the offending field.
void validateScenario(const Scenario& s);

struct TrajectorySample {
  double t = 0.0;
  int highLevelStep = 0;
  Vec3 x = Vec3::Zero();
  Vector q;                 // empty in point-mass mode
  Vec3 v = Vec3::Zero();    // velocity applied during this low-level step
  std::vector<Vec3> tips;
  std::vector<std::uint8_t> broken;
  double maxTaxelForce = 0.0;
};

struct WindowSummary {
  int highLevelStep = 0;
  Eigen::Index rows = 0;
  int frames = 0;
  bool contact = false;
  double netForceX = 0.0;
  Vec3 forceGradient = Vec3::Zero();
  Vec3 command = Vec3::Zero();
};

struct TrialResult {
  std::string scenario;
  ControllerKind controller = ControllerKind::rice;
  std::uint64_t seed = 0;
  bool reached = false;
  StopReason stopReason = StopReason::timeout;
  int brokenBranchCount = 0;
  std::vector<double> perBranchMaxDeviation;
  double totalDisturbance = 0.0;
  double finalTargetDeviation = 0.0;
  Vec3 finalPosition = Vec3::Zero();
  double maxOrientationDrift = 0.0;
  int highLevelSteps = 0;
  std::vector<TrajectorySample> trajectory;
  std::vector<WindowSummary> windows;
};

/// Runs the two-rate loop until a stop condition fires. Deterministic.
TrialResult runTrial(const Scenario& scenario);

/// Per-trial scalars, as exported and re-read for summaries.
struct TrialRecord {
  std::string scenario;
  ControllerKind controller = ControllerKind::rice;
  std::uint64_t seed = 0;
  bool reached = false;
  StopReason stopReason = StopReason::timeout;
  int brokenBranchCount = 0;
  double totalDisturbance = 0.0;
  double finalTargetDeviation = 0.0;
  std::vector<double> perBranchMaxDeviation;

  bool operator==(const TrialRecord&) const = default;
};

TrialRecord toRecord(const TrialResult& r);

struct SuiteSummary {
  std::vector<TrialRecord> trials;
  double medianDisturbance = 0.0;
  double medianTargetDeviation = 0.0;
  double noBreakReachRate = 0.0;

  bool operator==(const SuiteSummary&) const = default;
};

/// Median with the midpoint convention for even counts.
double median(std::vector<double> values);

/// Throws std::invalid_argument on an empty list.
SuiteSummary summarize(std::span<const TrialRecord> trials);
SuiteSummary summarize(std::span<const TrialResult> trials);

/// Runs trials on up to `threads` workers; results are ordered by index.
std::vector<TrialResult> runSuite(std::span<const Scenario> scenarios, unsigned threads = 0);

struct SweepEntry {
  double wf = 0.0;
  SuiteSummary summary;
};

/// One RICE trial set per w_f value (repetitions each), everything else fixed.
std::vector<SweepEntry> runSweep(const Scenario& base, std::span<const double> wfValues,
                                 int repetitions = 1, unsigned threads = 0);

/// Evenly spaced grid from first to last inclusive.
std::vector<double> linearGrid(double first, double last, int count);

}  // namespace canopy_reach
