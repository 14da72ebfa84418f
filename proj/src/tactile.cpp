#include "canopy_reach/tactile.hpp"

#include <stdexcept>

namespace canopy_reach {

void validateSensorGeometry(const SensorGeometry& g) {
  if (g.n < 1) throw std::invalid_argument("sensor: n must be >= 1");
  if (!(g.pitch > 0.0)) throw std::invalid_argument("sensor: pitch must be > 0");
  if (!(g.contactRadius > 0.0)) throw std::invalid_argument("sensor: contactRadius must be > 0");
  if (!(g.contactStiffness > 0.0)) {
    throw std::invalid_argument("sensor: contactStiffness must be > 0");
  }
}

std::vector<Vec3> taxelOffsets(const SensorGeometry& g) {
  std::vector<Vec3> out;
  out.reserve(g.taxelCount());
  const double centre = 0.5 * (g.n - 1);
  for (int pad = 0; pad < 2; ++pad) {
    const double sideY = pad == 0 ? g.padOffsetY : -g.padOffsetY;
    for (int row = 0; row < g.n; ++row) {
      for (int col = 0; col < g.n; ++col) {
        out.emplace_back(g.padForward, sideY + (col - centre) * g.pitch,
                         g.padOffsetZ + (row - centre) * g.pitch);
      }
    }
  }
  return out;
}

TactileSample sampleTactile(const SensorGeometry& g, const Pose& ee, const CanopyState& canopy) {
  const std::vector<Vec3> offsets = taxelOffsets(g);
  const auto count = static_cast<Eigen::Index>(offsets.size());

  TactileSample out;
  out.frame.forces = Matrix::Zero(count, 3);
  out.frame.taxelPositions.resize(count, 3);

  for (Eigen::Index i = 0; i < count; ++i) {
    const Vec3 p = ee.position + ee.rotation * offsets[i];
    out.frame.taxelPositions.row(i) = p.transpose();
    if (canopy.empty()) continue;

    const auto hit = closestPointOnCanopy(canopy, p);
    if (!hit || !(hit->distance < g.contactRadius)) continue;

    const Vec3 fWorld = g.contactStiffness * (g.contactRadius - hit->distance) * hit->normal;
    out.frame.forces.row(i) = (ee.rotation.transpose() * fWorld).transpose();

    ContactLoad load;
    load.branchIndex = hit->branchIndex;
    load.linkIndex = hit->linkIndex;
    load.leafIndex = hit->leafIndex;
    load.point = hit->point;
    load.force = -fWorld;
    load.stiffness = g.contactStiffness;
    load.normal = hit->normal;
    out.loads.push_back(load);
  }
  return out;
}

TactileWindow aggregateWindow(std::span<const TactileFrame> frames, const Vec3& eeRefPosition) {
  if (frames.empty()) throw std::invalid_argument("aggregateWindow: no frames");
  const Eigen::Index n = frames.front().forces.rows();
  for (const auto& f : frames) {
    if (f.forces.rows() != n || f.taxelPositions.rows() != n || f.forces.cols() != 3 ||
        f.taxelPositions.cols() != 3) {
      throw std::invalid_argument("aggregateWindow: frames have mismatched sizes");
    }
  }

  TactileWindow w;
  const auto j = static_cast<Eigen::Index>(frames.size());
  w.forces.resize(n * j, 3);
  w.positions.resize(n * j, 3);
  for (Eigen::Index m = 0; m < j; ++m) {
    w.forces.middleRows(m * n, n) = frames[m].forces;
    w.positions.middleRows(m * n, n) = frames[m].taxelPositions;
  }
  w.fRef = n > 0 ? Vec3(frames.front().forces.colwise().mean().transpose()) : Vec3::Zero();
  w.xRef = eeRefPosition;
  w.frames = static_cast<int>(j);
  return w;
}

}  // namespace canopy_reach
