#pragma once

#include <span>
#include <vector>

#include "canopy_reach/canopy.hpp"
#include "canopy_reach/numerics.hpp"

namespace canopy_reach {

/// Two planar n×n taxel pads facing +x_EE, one on each finger. Taxel rows run
/// along z_EE and columns along y_EE; pad 0 sits at +padOffsetY.
struct SensorGeometry {
  int n = 4;
  double pitch = 0.005;
  double padOffsetY = 0.0125;
  double padOffsetZ = 0.0;
  double padForward = 0.02;       // pad plane offset along x_EE (fingertips lead the EE origin)
  double contactRadius = 0.004;   // taxel sensing radius
  double contactStiffness = 1000; // k_c, N/m per taxel

  int taxelsPerPad() const { return n * n; }
  int taxelCount() const { return 2 * n * n; }
};

void validateSensorGeometry(const SensorGeometry& g);

/// Taxel positions in the EE frame, index = pad·n² + row·n + col.
std::vector<Vec3> taxelOffsets(const SensorGeometry& g);

struct TactileFrame {
  Matrix forces;          // N×3, EE frame
  Matrix taxelPositions;  // N×3, world frame
  int index = 1;          // m within the window
};

struct TactileSample {
  TactileFrame frame;
  std::vector<ContactLoad> loads;  // equal and opposite, world frame
};

/// Linear penalty contact for every taxel against the canopy:
/// f = k_c·(r_c − distance) along the surface normal while distance < r_c.
TactileSample sampleTactile(const SensorGeometry& g, const Pose& ee, const CanopyState& canopy);

/// Everything the high-level step consumes from one window.
struct TactileWindow {
  Matrix forces;     // F_k, s×3
  Matrix positions;  // P_k, s×3
  Vec3 fRef = Vec3::Zero();
  Vec3 xRef = Vec3::Zero();
  int frames = 0;

  Eigen::Index rows() const { return forces.rows(); }
};

/// Frame-major, taxel-minor row concatenation; f_ref is the mean force of the
/// first frame. Throws std::invalid_argument on empty or inconsistent frames.
TactileWindow aggregateWindow(std::span<const TactileFrame> frames, const Vec3& eeRefPosition);

}  // namespace canopy_reach
