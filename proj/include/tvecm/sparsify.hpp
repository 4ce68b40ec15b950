#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "tvecm/errors.hpp"
#include "tvecm/linalg.hpp"

namespace tvecm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Group soft-threshold of the long-run matrix: column j is zeroed when its
/// adaptive penalty dominates the data norm, otherwise scaled toward zero.
/// `w_colnorms_sq(j)` is the squared Euclidean norm of column j of the
/// full-data matrix W, computed once per dataset.
inline MatrixXd savs_group_pi(const MatrixXd& pi_hat, const VectorXd& w_colnorms_sq) {
  MatrixXd out = MatrixXd::Zero(pi_hat.rows(), pi_hat.cols());
  for (Eigen::Index j = 0; j < pi_hat.cols(); ++j) {
    const double n = pi_hat.col(j).norm();
    if (n == 0.0) continue;  // zero column maps to zero by convention
    const double kappa = 1.0 / (n * n);
    if (kappa / (2.0 * n) >= w_colnorms_sq(j)) continue;
    const double factor = 1.0 - kappa / (2.0 * w_colnorms_sq(j) * n);
    out.col(j) = factor * pi_hat.col(j);
  }
  return out;
}

/// Element-wise SAVS soft-threshold with penalty 1/a^2.
inline VectorXd savs_lasso_a(const VectorXd& a_hat, const VectorXd& colnorms_sq) {
  VectorXd out = VectorXd::Zero(a_hat.size());
  for (Eigen::Index j = 0; j < a_hat.size(); ++j) {
    const double a = a_hat(j);
    if (a == 0.0) continue;
    const double delta = 1.0 / (a * a);
    const double aa = std::abs(a);
    if (delta / aa >= colnorms_sq(j)) continue;
    out(j) = a * (1.0 - delta / (colnorms_sq(j) * aa));
  }
  return out;
}

/// Largest singular value of the T x M residual matrix, via the M x M Gram.
inline double noise_threshold(const MatrixXd& residuals) {
  if (residuals.size() == 0) return 0.0;
  const MatrixXd gram = residuals.transpose() * residuals;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

/// Number of singular values of W Pi*' above the noise threshold, computed
/// from the precomputed Gram W'W (singular values squared are the eigenvalues
/// of Pi* W'W Pi*').
inline int estimate_rank(const MatrixXd& pi_star, const MatrixXd& wtw, double phi) {
  const MatrixXd gram = pi_star * wtw * pi_star.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(gram);
  int r = 0;
  const double phi2 = phi * phi;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > phi2) ++r;
  return r;
}

struct GlassoOptions {
  bool converge = false;       // iterate to convergence instead of one pass
  bool zero_penalty_hook = false;  // force all penalties to zero (testing)
  double tol = 1e-10;
  int max_outer = 200;
  int max_inner = 10000;
  double spd_floor = 1e-8;
};

struct GlassoResult {
  MatrixXd precision;
  int floored_eigenvalues = 0;
};

namespace detail {

inline double soft(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return -(-x - lambda);
  return 0.0;
}

}  // namespace detail

/// Graphical lasso on the precision matrix with element-wise penalties
/// lambda_ij = |sigma_ij^{-1}|^{-1/2} (i != j, lambda_ii = 0) taken from the
/// exact inverse of sigma_hat. Default mode runs exactly one block
/// coordinate-descent cycle with one inner soft-threshold sweep per column;
/// a column whose penalties are all zero is solved exactly.
inline GlassoResult glasso_one_pass(const MatrixXd& sigma_hat,
                                    const GlassoOptions& opt = {}) {
  const Eigen::Index M = sigma_hat.rows();
  if (sigma_hat.cols() != M) throw ContractError("glasso: matrix not square");
  Eigen::LLT<MatrixXd> llt(sigma_hat);
  if (llt.info() != Eigen::Success)
    throw ContractError("glasso: input covariance not positive definite");

  const MatrixXd prec_hat = llt.solve(MatrixXd::Identity(M, M));
  MatrixXd lambda = MatrixXd::Zero(M, M);
  if (!opt.zero_penalty_hook) {
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j)
        if (i != j)
          lambda(i, j) = 1.0 / std::sqrt(std::abs(prec_hat(i, j)) + 1e-300);
  }

  if (M == 1) {
    GlassoResult res;
    res.precision = MatrixXd::Constant(1, 1, 1.0 / sigma_hat(0, 0));
    return res;
  }

  MatrixXd W = sigma_hat;
  MatrixXd betas = MatrixXd::Zero(M - 1, M);  // column j holds beta for block j

  auto sweep_column = [&](Eigen::Index j) {
    // partition out row/column j
    MatrixXd W11(M - 1, M - 1);
    VectorXd s12(M - 1), lam(M - 1);
    {
      Eigen::Index r = 0;
      for (Eigen::Index a = 0; a < M; ++a) {
        if (a == j) continue;
        s12(r) = sigma_hat(a, j);
        lam(r) = lambda(a, j);
        Eigen::Index c = 0;
        for (Eigen::Index b = 0; b < M; ++b) {
          if (b == j) continue;
          W11(r, c++) = W(a, b);
        }
        ++r;
      }
    }
    VectorXd beta = betas.col(j);
    if (lam.maxCoeff() == 0.0) {
      beta = W11.ldlt().solve(s12);
    } else {
      const int sweeps = opt.converge ? opt.max_inner : 1;
      for (int it = 0; it < sweeps; ++it) {
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < M - 1; ++k) {
          double resid = s12(k) - W11.row(k).dot(beta) + W11(k, k) * beta(k);
          double updated = detail::soft(resid, lam(k)) / W11(k, k);
          max_change = std::max(max_change, std::abs(updated - beta(k)));
          beta(k) = updated;
        }
        if (max_change < opt.tol) break;
      }
    }
    betas.col(j) = beta;
    // write back w12 = W11 beta
    VectorXd w12 = W11 * beta;
    Eigen::Index r = 0;
    for (Eigen::Index a = 0; a < M; ++a) {
      if (a == j) continue;
      W(a, j) = w12(r);
      W(j, a) = w12(r);
      ++r;
    }
  };

  const int outer = opt.converge ? opt.max_outer : 1;
  MatrixXd W_prev = W;
  for (int cycle = 0; cycle < outer; ++cycle) {
    for (Eigen::Index j = 0; j < M; ++j) sweep_column(j);
    if (opt.converge) {
      if ((W - W_prev).cwiseAbs().maxCoeff() < opt.tol) break;
      W_prev = W;
    }
  }

  MatrixXd theta = MatrixXd::Zero(M, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    VectorXd w12(M - 1);
    Eigen::Index r = 0;
    for (Eigen::Index a = 0; a < M; ++a)
      if (a != j) w12(r++) = W(a, j);
    const double denom = W(j, j) - w12.dot(betas.col(j));
    const double tjj = 1.0 / denom;
    theta(j, j) = tjj;
    r = 0;
    for (Eigen::Index a = 0; a < M; ++a) {
      if (a == j) continue;
      const double val = -betas.col(j)(r) * tjj;
      // exact zeros in beta must survive the symmetrization
      if (betas.col(j)(r) != 0.0) {
        theta(a, j) = val;
      }
      ++r;
    }
  }
  // symmetrize: keep an exact zero only if both directions agree it is zero
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = i + 1; j < M; ++j) {
      if (theta(i, j) == 0.0 && theta(j, i) == 0.0) continue;
      const double avg = 0.5 * (theta(i, j) + theta(j, i));
      theta(i, j) = avg;
      theta(j, i) = avg;
    }
  }

  GlassoResult res;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(theta);
  if (es.eigenvalues().minCoeff() < opt.spd_floor) {
    res.precision = make_spd(theta, opt.spd_floor, &res.floored_eigenvalues);
  } else {
    res.precision = theta;
  }
  return res;
}

/// Share of non-zero sparsified draws per (time, coefficient).
/// draws[s][t] is the sparsified matrix of draw s at time t.
inline std::vector<MatrixXd> inclusion_probabilities(
    const std::vector<std::vector<MatrixXd>>& draws) {
  if (draws.empty() || draws.front().empty())
    throw ContractError("inclusion_probabilities: empty archive");
  const std::size_t S = draws.size();
  const std::size_t T = draws.front().size();
  std::vector<MatrixXd> pip(T, MatrixXd::Zero(draws[0][0].rows(), draws[0][0].cols()));
  for (const auto& draw : draws) {
    if (draw.size() != T)
      throw ContractError("inclusion_probabilities: ragged archive");
    for (std::size_t t = 0; t < T; ++t)
      pip[t] += (draw[t].array() != 0.0).cast<double>().matrix();
  }
  for (auto& p : pip) p /= static_cast<double>(S);
  return pip;
}

/// Posterior probability of each rank value per period: rows r = 0..max_rank,
/// columns t. Each column sums to one.
inline MatrixXd rank_probabilities(const std::vector<std::vector<int>>& ranks,
                                   int max_rank) {
  if (ranks.empty() || ranks.front().empty())
    throw ContractError("rank_probabilities: empty archive");
  const std::size_t S = ranks.size();
  const std::size_t T = ranks.front().size();
  MatrixXd ppr = MatrixXd::Zero(max_rank + 1, static_cast<Eigen::Index>(T));
  for (const auto& path : ranks) {
    if (path.size() != T) throw ContractError("rank_probabilities: ragged archive");
    for (std::size_t t = 0; t < T; ++t) {
      int r = std::clamp(path[t], 0, max_rank);
      ppr(r, static_cast<Eigen::Index>(t)) += 1.0;
    }
  }
  return ppr / static_cast<double>(S);
}

}  // namespace tvecm
