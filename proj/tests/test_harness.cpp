#include <filesystem>
#include <fstream>
#include <sstream>

#include "canopy_reach/harness.hpp"
#include "canopy_reach/reference_scenarios.hpp"
#include "canopy_reach/scenario_io.hpp"
#include "doctest.h"

using namespace canopy_reach;
namespace fs = std::filesystem;

namespace {

Scenario freeSpace(double distance) {
  Scenario s;
  s.name = "free";
  s.target = Vec3(distance, 0, 0);
  s.controller.kind = ControllerKind::position;
  return s;
}

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("canopy_reach_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> readLines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void checkSameTrial(const TrialResult& a, const TrialResult& b) {
  CHECK(toRecord(a) == toRecord(b));
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].x == b.trajectory[i].x);
    CHECK(a.trajectory[i].v == b.trajectory[i].v);
    CHECK(a.trajectory[i].tips == b.trajectory[i].tips);
  }
}

}  // namespace

TEST_CASE("rates give the low-level step count") {
  Scenario s;
  CHECK(lowStepsPerHighStep(s) == 2);
  s.lowRate = 125.0;
  CHECK_THROWS_AS(lowStepsPerHighStep(s), std::invalid_argument);
  s.lowRate = 200.0;
  CHECK(lowStepsPerHighStep(s) == 4);
}

TEST_CASE("free-space position run takes distance over speed") {
  // Tight tolerance so the stop lands on the target itself.
  Scenario s = freeSpace(0.3);
  s.targetTolerance = 1e-6;
  const TrialResult r = runTrial(s);
  CHECK(r.reached);
  CHECK((r.stopReason == StopReason::target));
  CHECK(std::abs(r.trajectory.back().t - 30.0) <= 0.02 + 1e-9);

  // Default tolerance stops 5 mm early; the first window has no command yet.
  const TrialResult d = runTrial(freeSpace(0.3));
  CHECK(d.reached);
  CHECK(std::abs(d.trajectory.back().t - ((0.3 - 0.005) / 0.01 + 0.02)) <= 0.02 + 1e-9);
  CHECK(d.finalTargetDeviation <= 0.005);
  CHECK(d.maxOrientationDrift < 1e-9);
}

TEST_CASE("every high-level step consumes j frames of 2n^2 taxels") {
  const Scenario s = referenceBlockingScenario();
  const TrialResult r = runTrial(s);
  REQUIRE(!r.windows.empty());
  for (const auto& w : r.windows) {
    CHECK(w.frames == 2);
    CHECK(w.rows == 64);
  }
  CHECK(r.trajectory.size() == 2u * static_cast<std::size_t>(r.highLevelSteps));
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    CHECK(r.trajectory[i].highLevelStep == static_cast<int>(i / 2) + 1);
  }

  Scenario slow = s;
  slow.lowRate = 200.0;
  slow.maxDuration = 1.0;
  const TrialResult q = runTrial(slow);
  for (const auto& w : q.windows) CHECK(w.rows == 128);
}

TEST_CASE("trials are deterministic") {
  for (auto kind : {ControllerKind::rice, ControllerKind::position, ControllerKind::hybrid}) {
    const Scenario s = withController(referenceSuite()[7], kind);
    checkSameTrial(runTrial(s), runTrial(s));
  }
}

TEST_CASE("trial metrics agree with the trajectory log") {
  const Scenario s = withController(referenceSuite()[8], ControllerKind::position);
  const TrialResult r = runTrial(s);
  const CanopyState rest = buildCanopy(s.canopy, s.seed);
  double total = 0.0;
  for (std::size_t b = 0; b < rest.size(); ++b) {
    double best = 0.0;
    for (const auto& row : r.trajectory) {
      best = std::max(best, (row.tips[b] - rest.branches[b].tip()).norm());
    }
    CHECK(best == doctest::Approx(r.perBranchMaxDeviation[b]).epsilon(1e-12));
    total += best;
  }
  CHECK(total == doctest::Approx(r.totalDisturbance).epsilon(1e-12));

  int broken = 0;
  for (auto f : r.trajectory.back().broken) broken += f;
  CHECK(broken == r.brokenBranchCount);
  // Break flags latch in the log.
  for (std::size_t b = 0; b < rest.size(); ++b) {
    bool seen = false;
    for (const auto& row : r.trajectory) {
      if (seen) CHECK(row.broken[b] == 1);
      seen = seen || row.broken[b];
    }
  }
  if (r.reached) CHECK(r.finalTargetDeviation <= s.targetTolerance);
}

TEST_CASE("hybrid stalls against a blocking branch that cannot break") {
  Scenario s = referenceBlockingScenario();
  s.canopy[0].breakAngle = 10.0;
  s.controller.kind = ControllerKind::hybrid;
  const TrialResult r = runTrial(s);
  CHECK_FALSE(r.reached);
  CHECK((r.stopReason == StopReason::stall));
}

TEST_CASE("stop on breakage") {
  Scenario s = withController(referenceBlockingScenario(), ControllerKind::position);
  s.stopOnBreakage = true;
  const TrialResult r = runTrial(s);
  CHECK((r.stopReason == StopReason::breakage));
  CHECK_FALSE(r.reached);
  CHECK(r.brokenBranchCount >= 1);
}

TEST_CASE("entering a mounting frame stops the trial") {
  Scenario s = freeSpace(0.3);
  s.mountingFrames.push_back({Vec3(0.1, -0.05, -0.05), Vec3(0.2, 0.05, 0.05)});
  const TrialResult r = runTrial(s);
  CHECK((r.stopReason == StopReason::geometryViolation));
  // The pads lead the end-effector, so they reach the box first.
  CHECK(r.finalPosition.x() < 0.1);
  CHECK(r.finalPosition.x() > 0.1 - s.sensor.padForward - 1e-3);
}

TEST_CASE("timeout") {
  Scenario s = freeSpace(0.3);
  s.maxDuration = 2.0;
  const TrialResult r = runTrial(s);
  CHECK((r.stopReason == StopReason::timeout));
  CHECK(r.highLevelSteps == 100);
}

TEST_CASE("arm mode tracks the same path as the point mass") {
  const Scenario point = freeSpace(0.1);
  const Scenario arm = withReferenceArm(point);
  const TrialResult a = runTrial(point);
  const TrialResult b = runTrial(arm);
  CHECK(b.reached);
  CHECK(std::abs(static_cast<double>(a.trajectory.size()) - static_cast<double>(b.trajectory.size())) <= 2);
  CHECK((a.finalPosition - b.finalPosition).norm() < 1e-3);
}

TEST_CASE("median and summaries") {
  CHECK(median({1.0, 2.0, 3.0, 4.0}) == 2.5);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK_THROWS_AS(median({}), std::invalid_argument);

  std::vector<TrialRecord> recs(10);
  for (auto& r : recs) r.reached = true;
  CHECK(summarize(std::span<const TrialRecord>(recs)).noBreakReachRate == 1.0);
  recs[0].brokenBranchCount = 1;
  recs[1].reached = false;
  CHECK(summarize(std::span<const TrialRecord>(recs)).noBreakReachRate == doctest::Approx(0.8));
  CHECK_THROWS_AS(summarize(std::span<const TrialRecord>()), std::invalid_argument);

  std::vector<TrialRecord> mm(4);
  for (int i = 0; i < 4; ++i) mm[i].totalDisturbance = 0.001 * (i + 1);
  CHECK(summarize(std::span<const TrialRecord>(mm)).medianDisturbance == doctest::Approx(0.0025));
}

TEST_CASE("parallel suites match sequential runs") {
  std::vector<Scenario> scenarios;
  for (const auto& s : referenceSuite()) {
    scenarios.push_back(withController(s, ControllerKind::rice));
    scenarios.push_back(withController(s, ControllerKind::hybrid));
  }
  const auto parallel = runSuite(scenarios, 4);
  REQUIRE(parallel.size() == scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) checkSameTrial(parallel[i], runTrial(scenarios[i]));
}

TEST_CASE("sweep") {
  const Scenario base = referenceBlockingScenario();
  const auto grid = linearGrid(0.2, 3.0, 15);
  REQUIRE(grid.size() == 15u);
  CHECK(grid.front() == 0.2);
  CHECK(grid.back() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(grid[1] == doctest::Approx(0.4));

  const std::vector<double> values{0.0, 0.2, 2.0};
  const auto sweep = runSweep(base, values, 2, 2);
  REQUIRE(sweep.size() == 3u);
  for (const auto& e : sweep) CHECK(e.summary.trials.size() == 2u);

  const TrialResult zero = runTrial([&] {
    Scenario s = base;
    s.controller.wf = 0.0;
    return s;
  }());
  const TrialResult pos = runTrial(withController(base, ControllerKind::position));
  REQUIRE(zero.trajectory.size() == pos.trajectory.size());
  for (std::size_t i = 0; i < pos.trajectory.size(); ++i) {
    CHECK((zero.trajectory[i].x - pos.trajectory[i].x).norm() < 1e-12);
  }
  CHECK(sweep[0].summary.trials[0].totalDisturbance ==
        doctest::Approx(pos.totalDisturbance).epsilon(1e-9));

  const std::vector<double> negative{-1.0};
  CHECK_THROWS_AS(runSweep(base, negative), std::invalid_argument);
}

TEST_CASE("dense random scenarios") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Scenario a = denseRandomScenario(seed);
    const Scenario b = denseRandomScenario(seed);
    CHECK(serializeScenario(a) == serializeScenario(b));
    CHECK(a.canopy.size() >= 8u);
    CHECK(a.canopy.size() <= 15u);
    for (const auto& br : a.canopy) CHECK_FALSE(br.leaves.empty());
  }
  CHECK(serializeScenario(denseRandomScenario(1)) != serializeScenario(denseRandomScenario(2)));
}

TEST_CASE("scenario JSON round trip") {
  for (Scenario s : referenceSuite()) {
    const std::string text = serializeScenario(s);
    const Scenario back = parseScenario(text);
    CHECK(serializeScenario(back) == text);
    checkSameTrial(runTrial(s), runTrial(back));
  }
  const Scenario arm = withReferenceArm(referenceBlockingScenario());
  const Scenario armBack = parseScenario(serializeScenario(arm));
  REQUIRE(armBack.arm.has_value());
  CHECK(armBack.arm->initialJoints == arm.arm->initialJoints);

  const fs::path dir = scratchDir("roundtrip");
  saveScenario(denseRandomScenario(4), dir / "dense.json");
  CHECK(serializeScenario(loadScenario(dir / "dense.json")) == serializeScenario(denseRandomScenario(4)));
}

TEST_CASE("minimal scenario files use defaults") {
  const Scenario s = parseScenario(R"({
    "schemaVersion": 1,
    "target": [0.2, 0, 0],
    "canopy": [{"dimension": 0.01, "length": 0.3,
                "attachment": {"position": [0.1, 0.01, -0.15]}}],
    "arm": {"model": "reference"}
  })");
  CHECK((s.controller.kind == ControllerKind::rice));
  CHECK(s.controller.wf == 2.0);
  CHECK(s.highRate == 50.0);
  CHECK(s.lowRate == 100.0);
  CHECK(s.targetTolerance == 0.005);
  REQUIRE(s.arm.has_value());
  CHECK((forwardKinematics(s.arm->model, s.arm->initialJoints).position - s.initialPosition).norm() < 1e-6);
}

TEST_CASE("malformed scenarios name the offending field") {
  const auto fieldOf = [](const std::string& text) -> std::string {
    try {
      parseScenario(text);
    } catch (const ScenarioError& e) {
      return e.field();
    }
    return "<no error>";
  };
  CHECK(fieldOf(R"({"schemaVersion": 2, "target": [0,0,0]})") == "schemaVersion");
  CHECK(fieldOf(R"({"target": [0,0,0]})") == "schemaVersion");
  CHECK(fieldOf(R"({"schemaVersion": 1})") == "target");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0]})") == "target");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0,0],
                    "canopy": [{"dimension": 0.01, "length": 0.3},
                               {"dimension": "thick", "length": 0.3}]})") == "canopy[1].dimension");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0,0],
                    "canopy": [{"dimension": -0.01, "length": 0.3}]})") == "canopy[0]");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0,0],
                    "controller": {"type": "magic"}})") == "controller.type");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0,0],
                    "rates": {"high": 30, "low": 100}})") == "rates");
  CHECK(fieldOf(R"({"schemaVersion": 1, "target": [0,0,0], "stallWindow": 1.5})") == "stallWindow");

  try {
    parseScenario("{\n  \"schemaVersion\": 1,\n  \"target\": [0, 0, 0\n}");
    FAIL("expected a syntax error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("trajectory CSV layout") {
  const Scenario s = referenceSuite()[7];
  const TrialResult r = runTrial(s);
  const fs::path dir = scratchDir("csv");
  writeTrajectoryCsv(r, dir / "traj.csv");
  const auto lines = readLines(dir / "traj.csv");
  REQUIRE(lines.size() == r.trajectory.size() + 1);
  CHECK(lines[0] ==
        "t,x,y,z,vx,vy,vz,b0_tip_x,b0_tip_y,b0_tip_z,b1_tip_x,b1_tip_y,b1_tip_z,broken,stop_reason");
  CHECK(lines.back().ends_with(",target"));
  CHECK(lines[1].ends_with(",00,"));
}

TEST_CASE("re-summarizing exported trials reproduces the statistics") {
  std::vector<Scenario> scenarios;
  for (const auto& s : referenceSuite()) scenarios.push_back(withController(s, ControllerKind::position));
  const auto results = runSuite(scenarios, 2);
  const SuiteSummary direct = summarize(std::span<const TrialResult>(results));

  const fs::path dir = scratchDir("trials");
  writeTrialsCsv(direct.trials, dir / "trials.csv");
  const auto back = readTrialsCsv(dir / "trials.csv");
  CHECK(back == direct.trials);
  CHECK(summarize(std::span<const TrialRecord>(back)) == direct);

  writeSummaryJson(direct, dir / "summary.json");
  CHECK(fs::file_size(dir / "summary.json") > 0);
}
