#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvecm/linalg.hpp"
#include "tvecm/rng.hpp"

namespace tvecm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stored factorization Sigma_t = L_t H_t L_t' with L_t unit lower triangular.
/// l_inv holds L_t^{-1} (also unit lower triangular), h the diagonal of H_t.
struct SigmaFactor {
  MatrixXd l_inv;
  VectorXd h;

  /// Whitening inverse square root H^{-1/2} L^{-1}.
  MatrixXd inv_sqrt() const {
    return h.cwiseInverse().cwiseSqrt().asDiagonal() * l_inv;
  }

  MatrixXd sigma() const {
    MatrixXd L = l_inv.triangularView<Eigen::Lower>().solve(
        MatrixXd::Identity(l_inv.rows(), l_inv.cols()));
    return L * h.asDiagonal() * L.transpose();
  }

  MatrixXd precision() const {
    return l_inv.transpose() * h.cwiseInverse().asDiagonal() * l_inv;
  }
};

/// Long-run matrix and per-period adjustment matrices. beta is q x r_cols
/// (r_cols = q unless a fixed rank is imposed).
struct CointState {
  MatrixXd beta;
  std::vector<MatrixXd> alpha_paths;  // T matrices, each M x r_cols
  double s0 = 0.1;
  long skipped_normalizations = 0;
};

/// Draw the long-run matrix conditional on everything else. The per-period
/// design block is (w_t' kron Sigma_t^{-1/2} alpha_t); the Gram matrix and
/// right-hand side are accumulated streaming over t.
inline MatrixXd draw_beta(const MatrixXd& dy, const MatrixXd& x, const MatrixXd& w,
                          const std::vector<MatrixXd>& a_paths,
                          const std::vector<MatrixXd>& alpha_paths,
                          const std::vector<SigmaFactor>& sigma_paths, double s0,
                          Rng& rng) {
  const Eigen::Index T = dy.rows();
  const Eigen::Index M = dy.cols();
  const Eigen::Index q = w.cols();
  const Eigen::Index rc = alpha_paths.front().cols();
  const Eigen::Index dim = q * rc;

  MatrixXd prec = MatrixXd::Identity(dim, dim) / s0;
  VectorXd rhs = VectorXd::Zero(dim);
  MatrixXd xddot(M, dim);
  for (Eigen::Index t = 0; t < T; ++t) {
    const MatrixXd isq = sigma_paths[t].inv_sqrt();
    const MatrixXd c = isq * alpha_paths[t];  // M x rc
    for (Eigen::Index j = 0; j < q; ++j)
      xddot.block(0, j * rc, M, rc) = w(t, j) * c;
    const VectorXd yddot =
        isq * (dy.row(t).transpose() - a_paths[t] * x.row(t).transpose());
    prec.noalias() += xddot.transpose() * xddot;
    rhs.noalias() += xddot.transpose() * yddot;
  }
  auto llt = chol_with_jitter(prec, "beta draw");
  VectorXd v = draw_gaussian_from_precision(llt, rhs, rng);
  // v is vec(beta') laid out column-major, i.e. rc entries per w-column
  MatrixXd beta(q, rc);
  for (Eigen::Index j = 0; j < q; ++j)
    beta.row(j) = v.segment(j * rc, rc).transpose();
  return beta;
}

/// Rotate (beta, alpha_t) so that beta'beta = I while leaving every
/// Pi_t = alpha_t beta' unchanged. A near-singular beta'beta skips the
/// normalization for this sweep (counted in state.skipped_normalizations).
inline bool normalize(MatrixXd& beta, std::vector<MatrixXd>& alpha_paths,
                      long* skip_counter = nullptr) {
  const MatrixXd gram = beta.transpose() * beta;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  if (es.eigenvalues().minCoeff() < 1e-12) {
    if (skip_counter) ++(*skip_counter);
    return false;
  }
  const MatrixXd zeta = es.eigenvectors() *
                        es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                        es.eigenvectors().transpose();
  const MatrixXd zeta_inv = es.eigenvectors() *
                            es.eigenvalues().cwiseSqrt().asDiagonal() *
                            es.eigenvectors().transpose();
  beta = beta * zeta;
  for (auto& a : alpha_paths) a = a * zeta_inv;
  return true;
}

/// Pi_t = alpha_t beta' for every t.
inline std::vector<MatrixXd> assemble_pi(const std::vector<MatrixXd>& alpha_paths,
                                         const MatrixXd& beta) {
  std::vector<MatrixXd> pi;
  pi.reserve(alpha_paths.size());
  for (const auto& a : alpha_paths) pi.push_back(a * beta.transpose());
  return pi;
}

}  // namespace tvecm
