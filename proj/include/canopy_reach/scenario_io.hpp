#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "canopy_reach/harness.hpp"

namespace canopy_reach {

inline constexpr int kScenarioSchemaVersion = 1;

/// Parse or validation failure; `field` is a JSON path such as
/// "canopy[1].dimension" (empty for syntax errors, which carry a line).
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

Scenario parseScenario(const std::string& jsonText);
std::string serializeScenario(const Scenario& s);

Scenario loadScenario(const std::filesystem::path& path);
void saveScenario(const Scenario& s, const std::filesystem::path& path);

/// One row per low-level step after a header:
/// t,x,y,z,vx,vy,vz,b<i>_tip_x,b<i>_tip_y,b<i>_tip_z...,broken,stop_reason
/// `broken` holds one 0/1 character per branch; stop_reason is filled on the
/// final row only.
void writeTrajectoryCsv(const TrialResult& r, const std::filesystem::path& path);

/// One row per trial; doubles are written with round-trip precision.
void writeTrialsCsv(std::span<const TrialRecord> trials, const std::filesystem::path& path);
std::vector<TrialRecord> readTrialsCsv(const std::filesystem::path& path);

std::string summaryToJson(const SuiteSummary& s);
void writeSummaryJson(const SuiteSummary& s, const std::filesystem::path& path);

}  // namespace canopy_reach
