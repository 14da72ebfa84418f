#pragma once

#include <cstdint>
#include <vector>

#include "canopy_reach/harness.hpp"

namespace canopy_reach {

/// Built-in evaluation set. Every scenario uses the point-mass end-effector and
/// RICE with default gains; switch `controller.kind` to compare baselines.
/// Tags: "blocking" (a branch lies across the straight path), "stiff"
/// (blocking branch strong enough that forcing through breaks it), "multi".
std::vector<Scenario> referenceSuite();

/// Single blocking branch used for the w_f sweep.
Scenario referenceBlockingScenario();

/// Small set for repetition studies.
std::vector<Scenario> repetitionScenarios();

/// Cluttered canopy of 8 to 15 leafy branches drawn from `seed`.
Scenario denseRandomScenario(std::uint64_t seed);

/// Drives the scenario with the reference 6R arm, based so that its home
/// pose puts the end-effector at `initialPosition`.
Scenario withReferenceArm(Scenario s);

/// Same scenario with a different controller type.
Scenario withController(Scenario s, ControllerKind kind);

}  // namespace canopy_reach
