#include "canopy_reach/canopy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace canopy_reach {
namespace {

Mat3 rotX(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotY(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

Mat3 rpyToRotation(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 anyPerpendicular(const Vec3& axis) {
  const Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return axis.cross(helper).normalized();
}

int linkCount(const BranchSpec& s) { return s.particleCount - 1; }
int branchDofs(const BranchSpec& s) { return 2 * s.particleCount; }
int leafDofOffset(const BranchSpec& s, int leaf) { return branchDofs(s) + 2 * leaf; }
int leafParentLink(const BranchSpec& s, int leaf) {
  return std::min(s.leaves[leaf].attachParticleIndex, linkCount(s) - 1);
}

/// Full kinematic snapshot of one branch, including per-DoF joint axes.
struct Kinematics {
  std::vector<Vec3> positions;
  std::vector<Mat3> linkRot;
  std::vector<Vec3> axis;    // per DoF, world frame
  std::vector<Vec3> origin;  // per DoF
  std::vector<Vec3> leafOrigin;
  std::vector<Mat3> leafRot;
};

void computeKinematics(const BranchModel& m, const std::vector<double>& q, Kinematics& k) {
  const BranchSpec& s = m.spec;
  const int links = linkCount(s);
  const int nLeaves = static_cast<int>(s.leaves.size());
  const int dofs = branchDofs(s) + 2 * nLeaves;
  const double ell = s.linkLength();

  k.positions.resize(s.particleCount);
  k.linkRot.resize(links);
  k.axis.resize(dofs);
  k.origin.resize(dofs);
  k.leafOrigin.resize(nLeaves);
  k.leafRot.resize(nLeaves);

  k.positions[0] = s.attachmentPosition;
  Mat3 r = m.restRotation;

  auto applyJoint = [&](int dof, const Vec3& at) {
    k.axis[dof] = r.col(0);
    k.origin[dof] = at;
    r = r * rotX(q[dof]);
    k.axis[dof + 1] = r.col(1);
    k.origin[dof + 1] = at;
    r = r * rotY(q[dof + 1]);
  };

  applyJoint(0, k.positions[0]);
  for (int i = 0; i < links; ++i) {
    applyJoint(2 + 2 * i, k.positions[i]);
    k.linkRot[i] = r;
    k.positions[i + 1] = k.positions[i] + ell * r.col(2);
  }

  for (int l = 0; l < nLeaves; ++l) {
    const int parent = leafParentLink(s, l);
    const Vec3 at = k.positions[s.leaves[l].attachParticleIndex];
    r = k.linkRot[parent] * m.leafRelativeRotation[l];
    applyJoint(leafDofOffset(s, l), at);
    k.leafOrigin[l] = at;
    k.leafRot[l] = r;
  }
}

std::vector<double> packAngles(const BranchState& b) {
  std::vector<double> q = b.jointAngles;
  q.insert(q.end(), b.leafAngles.begin(), b.leafAngles.end());
  return q;
}

void unpackAngles(const BranchSpec& s, const std::vector<double>& q, BranchState& b) {
  const auto n = static_cast<std::size_t>(branchDofs(s));
  std::copy(q.begin(), q.begin() + n, b.jointAngles.begin());
  std::copy(q.begin() + n, q.end(), b.leafAngles.begin());
}

bool exceedsBreakAngle(const BranchSpec& s, const std::vector<double>& q) {
  for (int j = 0; j < s.particleCount; ++j) {
    if (std::hypot(q[2 * j], q[2 * j + 1]) > s.breakAngle) return true;
  }
  return false;
}

/// A load bound to a material point of a link or leaf body.
struct BoundLoad {
  int leaf = -1;
  int link = 0;
  Vec3 local;  // coordinates in the body frame
  Vec3 start;  // world position at the start of relaxation
  Vec3 force;
  double stiffness = 0.0;
  Vec3 normal;
  double penetration = 0.0;  // initial spring compression
  int chainDofs = 0;         // leading branch DoFs that move the body
};

Vec3 materialPoint(const BoundLoad& l, const Kinematics& k) {
  if (l.leaf >= 0) return k.leafOrigin[l.leaf] + k.leafRot[l.leaf] * l.local;
  return k.positions[l.link] + k.linkRot[l.link] * l.local;
}

double loadEnergy(const BoundLoad& l, const Vec3& x) {
  const Vec3 delta = x - l.start;
  if (l.stiffness > 0.0) {
    const double c = std::max(0.0, l.penetration + l.normal.dot(delta));
    return 0.5 * l.stiffness * c * c;
  }
  return -l.force.dot(delta);
}

/// dE/dx for one load.
Vec3 loadGradient(const BoundLoad& l, const Vec3& x) {
  if (l.stiffness > 0.0) {
    const double c = std::max(0.0, l.penetration + l.normal.dot(x - l.start));
    return l.stiffness * c * l.normal;
  }
  return -l.force;
}

double energy(const BranchModel& m, const std::vector<double>& q, const std::vector<BoundLoad>& loads,
              Kinematics& k) {
  computeKinematics(m, q, k);
  double e = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) e += 0.5 * m.stiffness[i] * q[i] * q[i];
  for (const auto& l : loads) e += loadEnergy(l, materialPoint(l, k));
  return e;
}

template <typename F>
void forEachMovingDof(const BranchSpec& s, const BoundLoad& l, F&& f) {
  for (int d = 0; d < l.chainDofs; ++d) f(d);
  if (l.leaf >= 0) {
    const int off = leafDofOffset(s, l.leaf);
    f(off);
    f(off + 1);
  }
}

struct BranchRelax {
  BranchState state;
  std::vector<double> energies;
};

BranchRelax relaxBranch(const BranchModel& m, const BranchState& start,
                        const std::vector<const ContactLoad*>& raw, int iterations, double gain) {
  const BranchSpec& s = m.spec;
  BranchRelax out{start, {}};
  std::vector<double> q = packAngles(start);
  const int n = static_cast<int>(q.size());

  Kinematics k;
  computeKinematics(m, q, k);

  std::vector<BoundLoad> loads;
  loads.reserve(raw.size());
  for (const ContactLoad* c : raw) {
    BoundLoad b;
    b.leaf = c->leafIndex;
    b.link = std::clamp(c->linkIndex, 0, linkCount(s) - 1);
    if (b.leaf >= 0) {
      b.local = k.leafRot[b.leaf].transpose() * (c->point - k.leafOrigin[b.leaf]);
      b.chainDofs = 2 * leafParentLink(s, b.leaf) + 4;
    } else {
      b.local = k.linkRot[b.link].transpose() * (c->point - k.positions[b.link]);
      b.chainDofs = 2 * b.link + 4;
    }
    b.start = c->point;
    b.force = c->force;
    b.stiffness = c->stiffness;
    if (b.stiffness > 0.0) {
      b.normal = normalize(c->normal);
      b.penetration = std::max(0.0, -c->force.dot(b.normal)) / b.stiffness;
    }
    loads.push_back(b);
  }

  double e = energy(m, q, loads, k);
  out.energies.push_back(e);

  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd g(n);
  Kinematics trialK;
  std::vector<double> trial(q.size());

  for (int it = 0; it < iterations; ++it) {
    // Gauss–Newton model: joint springs plus active penalty springs.
    h.setZero();
    g.setZero();
    for (int i = 0; i < n; ++i) {
      h(i, i) = m.stiffness[i];
      g(i) = m.stiffness[i] * q[i];
    }
    Eigen::VectorXd jn(n);
    for (const auto& l : loads) {
      const Vec3 x = materialPoint(l, k);
      const Vec3 dEdx = loadGradient(l, x);
      const bool active = l.stiffness > 0.0 && dEdx.squaredNorm() > 0.0;
      jn.setZero();
      forEachMovingDof(s, l, [&](int d) {
        const Vec3 col = k.axis[d].cross(x - k.origin[d]);
        g(d) += col.dot(dEdx);
        if (active) jn(d) = col.dot(l.normal);
      });
      if (active) h.noalias() += l.stiffness * jn * jn.transpose();
    }
    if (g.lpNorm<Eigen::Infinity>() < 1e-14) break;

    const Eigen::VectorXd step = -h.ldlt().solve(g);
    double t = gain;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      for (int i = 0; i < n; ++i) trial[i] = q[i] + t * step(i);
      const double et = energy(m, trial, loads, trialK);
      if (et <= e) {
        accepted = true;
        e = et;
        break;
      }
    }
    if (!accepted) break;

    const double moved = t * step.lpNorm<Eigen::Infinity>();
    q.swap(trial);
    std::swap(k, trialK);
    out.energies.push_back(e);

    if (exceedsBreakAngle(s, q)) {
      out.state.broken = true;
      break;
    }
    if (moved < 1e-13) break;
  }

  unpackAngles(s, q, out.state);
  out.state.particlePositions = k.positions;
  out.state.linkRotations = k.linkRot;
  return out;
}

bool atRest(const BranchState& b) {
  for (double a : b.jointAngles)
    if (a != 0.0) return false;
  for (double a : b.leafAngles)
    if (a != 0.0) return false;
  return true;
}

SurfaceQuery capsuleQuery(const Vec3& a, const Vec3& b, double radius, const Vec3& q) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (q - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 c = a + t * ab;
  const Vec3 off = q - c;
  const double dAxis = off.norm();
  SurfaceQuery r;
  r.normal = dAxis > 1e-12 ? Vec3(off / dAxis) : anyPerpendicular(ab.normalized());
  r.point = c + radius * r.normal;
  r.distance = dAxis - radius;
  return r;
}

SurfaceQuery patchQuery(const LeafFrame& f, const std::array<double, 2>& half, const Vec3& q) {
  const Vec3 rel = q - f.origin;
  const Vec3 u = f.rotation.col(0);
  const Vec3 v = f.rotation.col(1);
  const Vec3 nrm = f.rotation.col(2);
  const double su = std::clamp(rel.dot(u), 0.0, 2.0 * half[0]);
  const double sv = std::clamp(rel.dot(v), -half[1], half[1]);
  SurfaceQuery r;
  r.point = f.origin + su * u + sv * v;
  const Vec3 off = q - r.point;
  r.distance = off.norm();
  if (r.distance > 1e-12) {
    r.normal = off / r.distance;
  } else {
    r.normal = nrm;
  }
  return r;
}

}  // namespace

double secondMomentOfArea(CrossSection section, double dimension) {
  const double d2 = dimension * dimension;
  if (section == CrossSection::circular) return std::numbers::pi * d2 * d2 / 64.0;
  return d2 * d2 / 12.0;
}

double bendingStiffness(CrossSection section, double dimension, double linkLength,
                        double youngsModulus) {
  return youngsModulus * secondMomentOfArea(section, dimension) / linkLength;
}

double effectiveInternalStiffness(const BranchSpec& spec) {
  if (spec.internalJointStiffness > 0.0) return spec.internalJointStiffness;
  return bendingStiffness(spec.crossSection, spec.dimension, spec.linkLength());
}

void validateBranchSpec(const BranchSpec& s) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("branch spec: " + field + " " + why);
  };
  if (!(s.dimension > 0.0)) fail("dimension", "must be > 0");
  if (!(s.length > 0.0)) fail("length", "must be > 0");
  if (s.particleCount < 2) fail("particleCount", "must be >= 2");
  if (!(s.breakAngle > 0.0)) fail("breakAngle", "must be > 0");
  if (!(s.externalJointStiffness > 0.0)) fail("externalJointStiffness", "must be > 0");
  if (s.internalJointStiffness < 0.0) fail("internalJointStiffness", "must be > 0");
  if (!s.attachmentPosition.allFinite() || !s.attachmentRpy.allFinite() ||
      !std::isfinite(s.orientationDeg)) {
    fail("attachment", "must be finite");
  }
  for (const auto& leaf : s.leaves) {
    if (leaf.attachParticleIndex < 0 || leaf.attachParticleIndex >= s.particleCount) {
      fail("leaves.attachParticleIndex", "outside the parent chain");
    }
    if (!(leaf.petioleStiffness > 0.0)) fail("leaves.petioleStiffness", "must be > 0");
    if (!(leaf.patchHalfExtents[0] > 0.0) || !(leaf.patchHalfExtents[1] > 0.0)) {
      fail("leaves.patchHalfExtents", "must be > 0");
    }
    if (!(leaf.patchNormal.norm() > 0.0)) fail("leaves.patchNormal", "must be non-zero");
  }
}

void updateBranchKinematics(const BranchModel& model, BranchState& branch) {
  Kinematics k;
  computeKinematics(model, packAngles(branch), k);
  branch.particlePositions = std::move(k.positions);
  branch.linkRotations = std::move(k.linkRot);
}

CanopyState emptyCanopy() {
  CanopyState s;
  s.model = std::make_shared<CanopyModel>();
  return s;
}

CanopyState buildCanopy(std::span<const BranchSpec> specs, std::uint64_t seed) {
  if (specs.empty()) throw std::invalid_argument("buildCanopy: no branches");

  auto model = std::make_shared<CanopyModel>();
  model->seed = seed;
  CanopyState state;

  for (const BranchSpec& spec : specs) {
    validateBranchSpec(spec);
    BranchModel bm;
    bm.spec = spec;
    const double tilt = spec.orientationDeg * std::numbers::pi / 180.0;
    bm.restRotation = rotX(-tilt) * rpyToRotation(spec.attachmentRpy);

    const double kInt = effectiveInternalStiffness(spec);
    bm.stiffness.assign(2, spec.externalJointStiffness);
    bm.stiffness.resize(2 * spec.particleCount, kInt);
    for (const auto& leaf : spec.leaves) {
      bm.stiffness.push_back(leaf.petioleStiffness);
      bm.stiffness.push_back(leaf.petioleStiffness);
    }

    BranchState bs;
    bs.jointAngles.assign(2 * spec.particleCount, 0.0);
    bs.leafAngles.assign(2 * spec.leaves.size(), 0.0);

    // Leaf frames are defined at rest relative to the parent link.
    bm.leafRelativeRotation.assign(spec.leaves.size(), Mat3::Identity());
    updateBranchKinematics(bm, bs);
    for (std::size_t l = 0; l < spec.leaves.size(); ++l) {
      const LeafSpec& leaf = spec.leaves[l];
      const Mat3& parent =
          bs.linkRotations[std::min(leaf.attachParticleIndex, spec.particleCount - 2)];
      const Vec3 axis = parent.col(2);
      const Vec3 n = leaf.patchNormal.normalized();
      Vec3 u = n.cross(axis);
      u = u.norm() > 1e-9 ? Vec3(u.normalized()) : anyPerpendicular(n);
      const Vec3 v = n.cross(u);
      Mat3 world;
      world.col(0) = u;
      world.col(1) = v;
      world.col(2) = n;
      bm.leafRelativeRotation[l] = parent.transpose() * world;
    }
    updateBranchKinematics(bm, bs);
    bm.restTip = bs.tip();

    model->branches.push_back(std::move(bm));
    state.branches.push_back(std::move(bs));
  }
  state.model = std::move(model);
  return state;
}

CanopyState relaxDeformation(const CanopyState& state, std::span<const ContactLoad> loads,
                             int iterations, double stepGain, std::vector<double>* energyTrace) {
  if (iterations < 1) throw std::invalid_argument("relaxDeformation: iterations must be >= 1");
  if (!(stepGain > 0.0)) throw std::invalid_argument("relaxDeformation: stepGain must be > 0");

  CanopyState out = state;
  std::vector<std::vector<const ContactLoad*>> perBranch(state.size());
  for (const ContactLoad& l : loads) {
    if (l.branchIndex < 0 || static_cast<std::size_t>(l.branchIndex) >= state.size()) {
      throw std::invalid_argument("relaxDeformation: load references unknown branch");
    }
    const auto& spec = state.branchModel(l.branchIndex).spec;
    if (l.leafIndex >= static_cast<int>(spec.leaves.size()) || l.linkIndex < 0 ||
        l.linkIndex >= spec.particleCount - 1) {
      throw std::invalid_argument("relaxDeformation: load references unknown link or leaf");
    }
    perBranch[l.branchIndex].push_back(&l);
  }

  std::vector<double> total;
  for (std::size_t b = 0; b < state.size(); ++b) {
    const BranchState& cur = state.branches[b];
    const BranchModel& m = state.branchModel(b);
    if (cur.broken || (perBranch[b].empty() && atRest(cur))) {
      if (energyTrace) {
        // Frozen or resting branches contribute a constant term.
        Kinematics k;
        std::vector<BoundLoad> none;
        const double e = cur.broken ? energy(m, packAngles(cur), none, k) : 0.0;
        if (total.empty()) total.assign(1, 0.0);
        for (double& t : total) t += e;
      }
      continue;
    }
    BranchRelax r = relaxBranch(m, cur, perBranch[b], iterations, stepGain);
    if (energyTrace) {
      // Pad shorter traces with their converged value.
      const std::size_t len = std::max(total.size(), r.energies.size());
      const double lastTotal = total.empty() ? 0.0 : total.back();
      total.resize(len, lastTotal);
      for (std::size_t i = 0; i < len; ++i) {
        total[i] += r.energies[std::min(i, r.energies.size() - 1)];
      }
    }
    out.branches[b] = std::move(r.state);
  }

  for (std::size_t b = 0; b < out.size(); ++b) {
    BranchState& bs = out.branches[b];
    bs.maxTipDeviation = std::max(bs.maxTipDeviation, tipDeviation(out, b));
  }
  if (energyTrace) *energyTrace = std::move(total);
  return out;
}

std::optional<SurfaceQuery> closestPointOnCanopy(const CanopyState& state, const Vec3& query) {
  std::optional<SurfaceQuery> best;
  for (std::size_t b = 0; b < state.size(); ++b) {
    const BranchState& bs = state.branches[b];
    const BranchSpec& spec = state.branchModel(b).spec;
    for (int i = 0; i + 1 < spec.particleCount; ++i) {
      SurfaceQuery q = capsuleQuery(bs.particlePositions[i], bs.particlePositions[i + 1],
                                    spec.radius(), query);
      if (!best || q.distance < best->distance) {
        q.branchIndex = static_cast<int>(b);
        q.linkIndex = i;
        best = q;
      }
    }
    for (std::size_t l = 0; l < spec.leaves.size(); ++l) {
      SurfaceQuery q =
          patchQuery(leafFrame(state, b, l), spec.leaves[l].patchHalfExtents, query);
      if (!best || q.distance < best->distance) {
        q.branchIndex = static_cast<int>(b);
        q.linkIndex = std::min(spec.leaves[l].attachParticleIndex, spec.particleCount - 2);
        q.leafIndex = static_cast<int>(l);
        best = q;
      }
    }
  }
  return best;
}

LeafFrame leafFrame(const CanopyState& state, std::size_t branch, std::size_t leaf) {
  const BranchModel& m = state.branchModel(branch);
  const BranchState& bs = state.branches[branch];
  const LeafSpec& spec = m.spec.leaves[leaf];
  const int parent = std::min(spec.attachParticleIndex, m.spec.particleCount - 2);
  const Mat3 r = bs.linkRotations[parent] * m.leafRelativeRotation[leaf] *
                 rotX(bs.leafAngles[2 * leaf]) * rotY(bs.leafAngles[2 * leaf + 1]);
  return {bs.particlePositions[spec.attachParticleIndex], r};
}

double tipDeviation(const CanopyState& state, std::size_t branch) {
  return (state.branches[branch].tip() - state.branchModel(branch).restTip).norm();
}

double totalDisturbance(const CanopyState& state) {
  double sum = 0.0;
  for (const auto& b : state.branches) sum += b.maxTipDeviation;
  return sum;
}

}  // namespace canopy_reach
