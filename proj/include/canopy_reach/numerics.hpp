#pragma once

#include <Eigen/Dense>

namespace canopy_reach {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Position plus orientation (columns of rotation are the frame axes).
struct Pose {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

/// Relative singular-value cutoff used by pseudoinverse() when none is given.
inline constexpr double kDefaultPinvTolerance = 1e-10;

/// Condition estimate of DᵀD above which solveNormalEquations() falls back to
/// the minimum-norm solution.
inline constexpr double kRankDeficientCondition = 1e10;

/// Unit vector along v, or exactly zero when ‖v‖ ≤ eps.
Vec3 normalize(const Vec3& v, double eps = 1e-12);

bool allFinite(const Eigen::Ref<const Matrix>& m);

/// Moore–Penrose pseudoinverse via SVD. Singular values below
/// tol·σ_max are treated as zero. Throws std::invalid_argument on non-finite
/// input or negative tol.
Matrix pseudoinverse(const Eigen::Ref<const Matrix>& m,
                     double tol = kDefaultPinvTolerance);

/// Least-squares g minimising ‖D·g − b‖² for a R×3 matrix D.
///
/// Uses the normal equations while DᵀD is well conditioned and switches to
/// the truncated pseudoinverse of D (minimum-norm solution) otherwise.
Vec3 solveNormalEquations(const Eigen::Ref<const Matrix>& d,
                          const Eigen::Ref<const Vector>& b);

}  // namespace canopy_reach
