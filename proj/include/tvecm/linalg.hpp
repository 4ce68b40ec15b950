#pragma once

#include <Eigen/Dense>
#include <string>

#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"

namespace tvecm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cholesky of a symmetric matrix with a jitter ladder on the diagonal
/// (1e-10 -> 1e-6). Throws NumericalError with `what` on failure.
inline Eigen::LLT<MatrixXd> chol_with_jitter(const MatrixXd& sym,
                                             const std::string& what) {
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = sym.diagonal().cwiseAbs().maxCoeff() + 1.0;
  for (double jitter : {1e-10, 1e-8, 1e-6}) {
    MatrixXd jittered = sym;
    jittered.diagonal().array() += jitter * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("matrix not positive definite after jitter escalation: " + what);
}

/// Draw from N(mean, P^-1) where `prec_llt` is the Cholesky of the precision P.
/// mean = P^-1 rhs is computed internally from rhs.
inline VectorXd draw_gaussian_from_precision(const Eigen::LLT<MatrixXd>& prec_llt,
                                             const VectorXd& rhs, Rng& rng) {
  VectorXd mean = prec_llt.solve(rhs);
  VectorXd z(rhs.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  // x = mean + L^-T z has covariance (L L')^-1
  VectorXd dev = prec_llt.matrixU().solve(z);
  return mean + dev;
}

/// Symmetric matrix square root via eigendecomposition. Input must be SPD.
inline MatrixXd sym_sqrt(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Symmetric inverse square root; smallest eigenvalue below `tol` throws.
inline MatrixXd sym_inv_sqrt(const MatrixXd& sym, double tol,
                             const std::string& what) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() < tol)
    throw NumericalError("near-singular symmetric matrix: " + what);
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Force symmetry then floor eigenvalues at `floor_at`. Returns the number of
/// floored eigenvalues through `floored` when non-null.
inline MatrixXd make_spd(const MatrixXd& m, double floor_at, int* floored = nullptr) {
  MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  VectorXd ev = es.eigenvalues();
  int n_floored = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < floor_at) {
      ev(i) = floor_at;
      ++n_floored;
    }
  }
  if (floored) *floored = n_floored;
  if (n_floored == 0) return sym;
  MatrixXd rebuilt = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (rebuilt + rebuilt.transpose());
}

}  // namespace tvecm
