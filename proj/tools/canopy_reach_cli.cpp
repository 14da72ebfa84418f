// canopy-reach: run tactile reaching trials, sweeps and suites from JSON scenarios.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "canopy_reach/reference_scenarios.hpp"
#include "canopy_reach/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace canopy_reach;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string controller;
  std::string mode = "point";
  bool stopOnBreakage = false;
};

void addOverrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the scenario seed");
  cmd->add_option("--controller", o.controller, "rice, position or hybrid")
      ->check(CLI::IsMember({"rice", "position", "hybrid"}));
  cmd->add_option("--mode", o.mode, "End-effector model")
      ->check(CLI::IsMember({"point", "arm"}));
  cmd->add_flag("--stop-on-breakage", o.stopOnBreakage, "Abort a trial on the first break");
}

Scenario apply(Scenario s, const Overrides& o) {
  if (o.seed) s.seed = *o.seed;
  if (!o.controller.empty()) s.controller.kind = parseControllerKind(o.controller);
  if (o.stopOnBreakage) s.stopOnBreakage = true;
  if (o.mode == "arm" && !s.arm) s = withReferenceArm(std::move(s));
  return s;
}

// "first:last:count" or a comma-separated list.
std::vector<double> parseGrid(const std::string& spec) {
  if (spec.find(':') != std::string::npos) {
    double first = 0.0, last = 0.0;
    int count = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &first, &last, &count) != 3) {
      throw CLI::ValidationError("--wf", "expected first:last:count");
    }
    return linearGrid(first, last, count);
  }
  std::vector<double> out;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(std::stod(item));
  return out;
}

void printTrial(const TrialResult& r) {
  std::printf("%-24s %-8s seed=%llu reached=%d stop=%-18s broken=%d disturbance=%.4f target_dev=%.4f\n",
              r.scenario.c_str(), toString(r.controller).c_str(),
              static_cast<unsigned long long>(r.seed), r.reached ? 1 : 0,
              toString(r.stopReason).c_str(), r.brokenBranchCount, r.totalDisturbance,
              r.finalTargetDeviation);
}

void printSummary(const SuiteSummary& s) {
  std::printf("trials=%zu median_disturbance=%.4f median_target_dev=%.4f no_break_reach=%.3f\n",
              s.trials.size(), s.medianDisturbance, s.medianTargetDeviation, s.noBreakReachRate);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile-aware reaching in deformable canopies"};
  app.require_subcommand(1);

  std::string scenarioPath;
  std::string outDir = "results";
  unsigned threads = 0;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Run one trial");
  run->add_option("scenario", scenarioPath, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", outDir, "Output directory");
  addOverrides(run, ov);

  std::string wfSpec = "0.2:3.0:15";
  int reps = 1;
  auto* sweep = app.add_subcommand("sweep", "Sweep the force weight w_f");
  sweep->add_option("scenario", scenarioPath, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--wf", wfSpec, "first:last:count or a comma list");
  sweep->add_option("--reps", reps, "Repetitions per value")->check(CLI::PositiveNumber);
  sweep->add_option("--out", outDir, "Output directory");
  sweep->add_option("--threads", threads, "Worker threads (0 = hardware)");
  addOverrides(sweep, ov);

  std::string suiteDir;
  std::vector<std::string> controllers;
  auto* suite = app.add_subcommand("suite", "Run every scenario in a directory");
  suite->add_option("dir", suiteDir, "Directory of scenario JSON files")
      ->required()
      ->check(CLI::ExistingDirectory);
  suite->add_option("--controllers", controllers, "Controllers to compare (default: as in file)")
      ->delimiter(',');
  suite->add_option("--out", outDir, "Output directory");
  suite->add_option("--threads", threads, "Worker threads (0 = hardware)");
  addOverrides(suite, ov);

  std::string trialsPath;
  auto* summarizeCmd = app.add_subcommand("summarize", "Summarize a trials CSV");
  summarizeCmd->add_option("trials", trialsPath, "trials.csv")->required()->check(CLI::ExistingFile);

  std::string exportDir;
  std::vector<std::uint64_t> denseSeeds;
  auto* exportCmd = app.add_subcommand("export-reference", "Write the built-in scenarios as JSON");
  exportCmd->add_option("dir", exportDir, "Destination directory")->required();
  exportCmd->add_option("--dense", denseSeeds, "Also write dense random scenarios for these seeds")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const Scenario s = apply(loadScenario(scenarioPath), ov);
      const TrialResult r = runTrial(s);
      printTrial(r);
      const std::vector<TrialRecord> rec{toRecord(r)};
      writeTrajectoryCsv(r, fs::path(outDir) / "trajectory.csv");
      writeTrialsCsv(rec, fs::path(outDir) / "trials.csv");
      writeSummaryJson(summarize(std::span<const TrialRecord>(rec)), fs::path(outDir) / "summary.json");
      return 0;
    }

    if (*sweep) {
      const Scenario s = apply(loadScenario(scenarioPath), ov);
      const auto grid = parseGrid(wfSpec);
      const auto entries = runSweep(s, grid, reps, threads);
      std::vector<TrialRecord> all;
      for (const auto& e : entries) {
        std::printf("wf=%.3f ", e.wf);
        printSummary(e.summary);
        all.insert(all.end(), e.summary.trials.begin(), e.summary.trials.end());
      }
      writeTrialsCsv(all, fs::path(outDir) / "sweep_trials.csv");
      return 0;
    }

    if (*suite) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(suiteDir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());

      bool failed = false;
      std::vector<Scenario> scenarios;
      for (const auto& f : files) {
        try {
          const Scenario s = apply(loadScenario(f), ov);
          if (controllers.empty()) {
            scenarios.push_back(s);
          } else {
            for (const auto& c : controllers) scenarios.push_back(withController(s, parseControllerKind(c)));
          }
        } catch (const std::exception& e) {
          std::fprintf(stderr, "error: %s: %s\n", f.string().c_str(), e.what());
          failed = true;
        }
      }
      if (scenarios.empty()) {
        std::fprintf(stderr, "error: no runnable scenarios in %s\n", suiteDir.c_str());
        return 1;
      }
      const auto results = runSuite(scenarios, threads);
      for (const auto& r : results) printTrial(r);
      std::vector<TrialRecord> records;
      for (const auto& r : results) records.push_back(toRecord(r));
      writeTrialsCsv(records, fs::path(outDir) / "trials.csv");
      const SuiteSummary summary = summarize(std::span<const TrialRecord>(records));
      writeSummaryJson(summary, fs::path(outDir) / "summary.json");
      printSummary(summary);
      return failed ? 1 : 0;
    }

    if (*summarizeCmd) {
      const auto records = readTrialsCsv(trialsPath);
      std::cout << summaryToJson(summarize(std::span<const TrialRecord>(records))) << '\n';
      return 0;
    }

    if (*exportCmd) {
      for (const auto& s : referenceSuite()) saveScenario(s, fs::path(exportDir) / (s.name + ".json"));
      for (auto seed : denseSeeds) {
        const Scenario s = denseRandomScenario(seed);
        saveScenario(s, fs::path(exportDir) / (s.name + ".json"));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
