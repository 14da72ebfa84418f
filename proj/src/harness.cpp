#include "canopy_reach/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace canopy_reach {
namespace {

double rotationAngle(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(0.5 * ((a.transpose() * b).trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace

std::string toString(ControllerKind k) {
  switch (k) {
    case ControllerKind::rice: return "rice";
    case ControllerKind::position: return "position";
    case ControllerKind::hybrid: return "hybrid";
  }
  return "?";
}

std::string toString(StopReason r) {
  switch (r) {
    case StopReason::target: return "target";
    case StopReason::stall: return "stall";
    case StopReason::timeout: return "timeout";
    case StopReason::breakage: return "breakage";
    case StopReason::geometryViolation: return "geometryViolation";
  }
  return "?";
}

ControllerKind parseControllerKind(const std::string& s) {
  if (s == "rice") return ControllerKind::rice;
  if (s == "position") return ControllerKind::position;
  if (s == "hybrid") return ControllerKind::hybrid;
  throw std::invalid_argument("unknown controller '" + s + "'");
}

StopReason parseStopReason(const std::string& s) {
  for (StopReason r : {StopReason::target, StopReason::stall, StopReason::timeout,
                       StopReason::breakage, StopReason::geometryViolation}) {
    if (toString(r) == s) return r;
  }
  throw std::invalid_argument("unknown stop reason '" + s + "'");
}

bool Scenario::hasTag(const std::string& t) const {
  return std::find(tags.begin(), tags.end(), t) != tags.end();
}

int lowStepsPerHighStep(const Scenario& s) {
  if (!(s.highRate > 0.0) || !(s.lowRate > 0.0)) {
    throw std::invalid_argument("rates: must be > 0");
  }
  const double ratio = s.lowRate / s.highRate;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw std::invalid_argument("rates: low/high must be a positive integer");
  }
  return static_cast<int>(rounded);
}

void validateScenario(const Scenario& s) {
  lowStepsPerHighStep(s);
  if (!(s.maxDuration > 0.0)) throw std::invalid_argument("maxDuration: must be > 0");
  if (!(s.targetTolerance > 0.0)) throw std::invalid_argument("targetTolerance: must be > 0");
  if (s.stallWindow < 1) throw std::invalid_argument("stallWindow: must be >= 1");
  if (s.stallEps < 0.0) throw std::invalid_argument("stallEps: must be >= 0");
  if (s.relaxIterations < 1) throw std::invalid_argument("relaxation.iterations: must be >= 1");
  if (!(s.relaxStepGain > 0.0)) throw std::invalid_argument("relaxation.stepGain: must be > 0");
  if (!s.target.allFinite()) throw std::invalid_argument("target: must be finite");
  if (!s.initialPosition.allFinite()) {
    throw std::invalid_argument("initialPosition: must be finite");
  }
  validateSensorGeometry(s.sensor);
  validate(s.controller.rice());
  validate(s.controller.hybrid());
  for (const auto& b : s.canopy) validateBranchSpec(b);
  if (s.arm) {
    validateArmModel(s.arm->model);
    if (s.arm->initialJoints.size() != s.arm->model.dof()) {
      throw std::invalid_argument("arm.initialJoints: wrong length");
    }
  }
}

TrialResult runTrial(const Scenario& sc) {
  validateScenario(sc);
  const int j = lowStepsPerHighStep(sc);
  const double tau = 1.0 / sc.lowRate;
  const double period = 1.0 / sc.highRate;
  const auto maxHighSteps = static_cast<int>(std::ceil(sc.maxDuration / period - 1e-9));

  CanopyState canopy = sc.canopy.empty() ? emptyCanopy() : buildCanopy(sc.canopy, sc.seed);
  const RiceParams rice = sc.controller.rice();
  const HybridParams hybrid = sc.controller.hybrid();

  Pose pose;
  Vector q;
  if (sc.arm) {
    q = sc.arm->initialJoints;
    pose = forwardKinematics(sc.arm->model, q);
  } else {
    pose.position = sc.initialPosition;
  }
  const Mat3 initialRotation = pose.rotation;

  TrialResult result;
  result.scenario = sc.name;
  result.controller = sc.controller.kind;
  result.seed = sc.seed;

  Vec3 v = Vec3::Zero();
  double admittance = hybrid.alpha;
  std::vector<Vec3> highLevelPositions{pose.position};
  std::vector<TactileFrame> frames;
  frames.reserve(j);
  double t = 0.0;
  std::optional<StopReason> stop;

  for (int k = 1; !stop; ++k) {
    const Vec3 xRef = pose.position;
    frames.clear();
    bool violation = false;

    for (int m = 1; m <= j; ++m) {
      TactileSample sample = sampleTactile(sc.sensor, pose, canopy);
      sample.frame.index = m;
      canopy = relaxDeformation(canopy, sample.loads, sc.relaxIterations, sc.relaxStepGain);

      if (sc.arm) {
        q = rrmcStep(sc.arm->model, q, v, tau).q;
        pose = forwardKinematics(sc.arm->model, q);
        result.maxOrientationDrift =
            std::max(result.maxOrientationDrift, rotationAngle(initialRotation, pose.rotation));
      } else {
        pose.position = pointMassStep(pose.position, v, tau);
      }
      t = (static_cast<double>(k - 1) * j + m) * tau;

      for (const auto& box : sc.mountingFrames) {
        if (box.contains(pose.position)) violation = true;
        for (Eigen::Index i = 0; i < sample.frame.taxelPositions.rows(); ++i) {
          if (box.contains(sample.frame.taxelPositions.row(i).transpose())) violation = true;
        }
      }

      TrajectorySample row;
      row.t = t;
      row.highLevelStep = k;
      row.x = pose.position;
      row.q = q;
      row.v = v;
      row.maxTaxelForce =
          sample.frame.forces.rows() > 0 ? sample.frame.forces.rowwise().norm().maxCoeff() : 0.0;
      row.tips.reserve(canopy.size());
      row.broken.reserve(canopy.size());
      for (const auto& b : canopy.branches) {
        row.tips.push_back(b.tip());
        row.broken.push_back(b.broken ? 1 : 0);
      }
      result.trajectory.push_back(std::move(row));
      frames.push_back(std::move(sample.frame));
    }

    const TactileWindow window = aggregateWindow(frames, xRef);
    WindowSummary ws;
    ws.highLevelStep = k;
    ws.rows = window.rows();
    ws.frames = window.frames;
    const Vec3 netForce = frames.back().forces.colwise().sum().transpose();
    ws.netForceX = std::abs(netForce.x());

    ControllerCommand cmd;
    switch (sc.controller.kind) {
      case ControllerKind::rice:
        cmd = riceStep(pose.position, sc.target, window, rice);
        break;
      case ControllerKind::position:
        cmd = positionStep(pose.position, sc.target, sc.controller.alpha);
        break;
      case ControllerKind::hybrid: {
        const HybridResult h = hybridStep(pose.position, sc.target, ws.netForceX, admittance,
                                          hybrid, period, pose.rotation);
        admittance = h.admittanceVelocity;
        cmd = h.command;
        break;
      }
    }
    v = cmd.v;
    ws.contact = cmd.contact;
    ws.forceGradient = cmd.forceGradient;
    ws.command = cmd.v;
    result.windows.push_back(ws);
    result.highLevelSteps = k;
    highLevelPositions.push_back(pose.position);

    const bool anyBroken = std::any_of(canopy.branches.begin(), canopy.branches.end(),
                                       [](const BranchState& b) { return b.broken; });
    if ((pose.position - sc.target).norm() <= sc.targetTolerance) {
      stop = StopReason::target;
    } else if (sc.stopOnBreakage && anyBroken) {
      stop = StopReason::breakage;
    } else if (violation) {
      stop = StopReason::geometryViolation;
    } else if (k >= sc.stallWindow &&
               (pose.position - highLevelPositions[k - sc.stallWindow]).norm() < sc.stallEps) {
      stop = StopReason::stall;
    } else if (k >= maxHighSteps) {
      stop = StopReason::timeout;
    }
  }

  result.stopReason = *stop;
  result.reached = result.stopReason == StopReason::target;
  result.finalPosition = pose.position;
  result.finalTargetDeviation = (pose.position - sc.target).norm();
  for (const auto& b : canopy.branches) {
    result.perBranchMaxDeviation.push_back(b.maxTipDeviation);
    if (b.broken) ++result.brokenBranchCount;
  }
  result.totalDisturbance = totalDisturbance(canopy);
  return result;
}

TrialRecord toRecord(const TrialResult& r) {
  return {r.scenario,         r.controller,           r.seed,
          r.reached,          r.stopReason,           r.brokenBranchCount,
          r.totalDisturbance, r.finalTargetDeviation, r.perBranchMaxDeviation};
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SuiteSummary summarize(std::span<const TrialRecord> trials) {
  if (trials.empty()) throw std::invalid_argument("summarize: no trials");
  SuiteSummary s;
  s.trials.assign(trials.begin(), trials.end());
  std::vector<double> disturbance, deviation;
  int good = 0;
  for (const auto& t : trials) {
    disturbance.push_back(t.totalDisturbance);
    deviation.push_back(t.finalTargetDeviation);
    if (t.reached && t.brokenBranchCount == 0) ++good;
  }
  s.medianDisturbance = median(disturbance);
  s.medianTargetDeviation = median(deviation);
  s.noBreakReachRate = static_cast<double>(good) / static_cast<double>(trials.size());
  return s;
}

SuiteSummary summarize(std::span<const TrialResult> trials) {
  std::vector<TrialRecord> records;
  records.reserve(trials.size());
  for (const auto& t : trials) records.push_back(toRecord(t));
  return summarize(records);
}

std::vector<TrialResult> runSuite(std::span<const Scenario> scenarios, unsigned threads) {
  std::vector<TrialResult> results(scenarios.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(scenarios.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) results[i] = runTrial(scenarios[i]);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(scenarios.size());
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < scenarios.size(); i = next++) {
        try {
          results[i] = runTrial(scenarios[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

std::vector<double> linearGrid(double first, double last, int count) {
  if (count < 1) throw std::invalid_argument("linearGrid: count must be >= 1");
  if (count == 1) return {first};
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    out[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

std::vector<SweepEntry> runSweep(const Scenario& base, std::span<const double> wfValues,
                                 int repetitions, unsigned threads) {
  if (repetitions < 1) throw std::invalid_argument("runSweep: repetitions must be >= 1");
  std::vector<Scenario> jobs;
  for (double wf : wfValues) {
    if (wf < 0.0) throw std::invalid_argument("runSweep: w_f values must be >= 0");
    for (int r = 0; r < repetitions; ++r) {
      Scenario s = base;
      s.controller.kind = ControllerKind::rice;
      s.controller.wf = wf;
      jobs.push_back(std::move(s));
    }
  }
  const std::vector<TrialResult> results = runSuite(jobs, threads);

  std::vector<SweepEntry> out;
  for (std::size_t i = 0; i < wfValues.size(); ++i) {
    const std::span<const TrialResult> slice(results.data() + i * repetitions, repetitions);
    out.push_back({wfValues[i], summarize(slice)});
  }
  return out;
}

}  // namespace canopy_reach
