#include "canopy_reach/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace canopy_reach {

Vec3 normalize(const Vec3& v, double eps) {
  const double n = v.norm();
  if (!(n > eps)) return Vec3::Zero();
  return v / n;
}

bool allFinite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

Matrix pseudoinverse(const Eigen::Ref<const Matrix>& m, double tol) {
  if (!allFinite(m)) {
    throw std::invalid_argument("pseudoinverse: matrix has non-finite entries");
  }
  if (!(tol >= 0.0)) {
    throw std::invalid_argument("pseudoinverse: tolerance must be >= 0");
  }
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);

  Vector sInv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) sInv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * sInv.asDiagonal() * svd.matrixU().transpose();
}

Vec3 solveNormalEquations(const Eigen::Ref<const Matrix>& d,
                          const Eigen::Ref<const Vector>& b) {
  if (d.cols() != 3) {
    throw std::invalid_argument("solveNormalEquations: D must have 3 columns");
  }
  if (d.rows() != b.size()) {
    throw std::invalid_argument("solveNormalEquations: row count mismatch");
  }
  if (d.rows() < 3) {
    throw std::invalid_argument("solveNormalEquations: need at least 3 rows");
  }
  if (!allFinite(d) || !b.allFinite()) {
    throw std::invalid_argument("solveNormalEquations: non-finite input");
  }

  const Mat3 dtd = d.transpose() * d;
  const Vec3 dtb = d.transpose() * b;

  // DᵀD is symmetric PSD, so its eigenvalues give the 2-norm condition.
  Eigen::SelfAdjointEigenSolver<Mat3> eig(dtd, Eigen::EigenvaluesOnly);
  const Vec3 lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = std::max(lambda.minCoeff(), 0.0);
  const bool wellConditioned = lmax > 0.0 && lmin * kRankDeficientCondition > lmax;

  if (wellConditioned) {
    return dtd.ldlt().solve(dtb);
  }
  return pseudoinverse(d) * b;
}

}  // namespace canopy_reach
