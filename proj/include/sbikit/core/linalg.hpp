#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sbikit/core/errors.hpp"

namespace sbikit {
namespace detail {

// B with B B^T = cov, via the symmetric eigendecomposition so that exactly
// singular (including zero) covariances factor cleanly. Eigenvalues below
// -tol relative to the largest mean the matrix is not PSD even after
// tolerance, which is a caller error.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols())
    throw DimensionError("psd_factor: covariance must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw SingularCovarianceError("psd_factor: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-12 * scale)
      throw SingularCovarianceError(
          "proposal covariance not positive semidefinite");
    lam[i] = std::sqrt(std::max(lam[i], 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace detail
}  // namespace sbikit
