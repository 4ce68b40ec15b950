#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "tvecm/linalg.hpp"
#include "tvecm/rng.hpp"
#include "tvecm/shrinkage.hpp"

namespace tvecm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Inputs for one equation of the recursive system. Z column order is
/// (cointegration block, lag/deterministic block, Cholesky block).
struct EquationData {
  VectorXd ylocal;  // T responses
  MatrixXd Z;       // T x K regressors
  VectorXd h;       // T observation variances
  VectorXd tau;     // T auxiliary scales; ones when t-errors are off

  Eigen::Index T() const { return ylocal.size(); }
  Eigen::Index K() const { return Z.cols(); }
};

/// Per-equation sampler state in the non-centered parameterization:
/// coefficient path at t is b0 + sqrt_theta .* btilde_t with btilde_0 = 0.
struct EquationState {
  VectorXd b0;          // K constants
  VectorXd sqrt_theta;  // K signed scale roots; only the square enters variances
  MatrixXd btilde;      // T x K normalized states
  HorseshoeState hs;

  EquationState(Eigen::Index T, Eigen::Index K)
      : b0(VectorXd::Zero(K)),
        sqrt_theta(VectorXd::Zero(K)),
        btilde(MatrixXd::Zero(T, K)),
        hs(K) {}

  Eigen::Index K() const { return b0.size(); }

  VectorXd stacked() const {
    VectorXd b(2 * K());
    b.head(K()) = b0;
    b.tail(K()) = sqrt_theta;
    return b;
  }

  void set_stacked(const VectorXd& bhat) {
    b0 = bhat.head(K());
    sqrt_theta = bhat.tail(K());
  }

  /// Coefficient vector at time t.
  VectorXd coeff_at(Eigen::Index t) const {
    return b0 + sqrt_theta.cwiseProduct(btilde.row(t).transpose());
  }
};

/// Joint draw of (b0, sqrt_theta) as one 2K Gaussian. The design stacks
/// Z_t and Z_t .* btilde_t, both scaled by 1/sqrt(h_t tau_t); the posterior
/// precision is solved by Cholesky with a jitter ladder.
inline VectorXd draw_constant_scales(const EquationData& eq, const MatrixXd& btilde,
                                     const HorseshoeState& hs, Rng& rng,
                                     const std::string& label = "") {
  const Eigen::Index T = eq.T();
  const Eigen::Index K = eq.K();
  MatrixXd zhat(T, 2 * K);
  VectorXd yhat(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double s = 1.0 / std::sqrt(eq.h(t) * eq.tau(t));
    zhat.block(t, 0, 1, K) = eq.Z.row(t) * s;
    zhat.block(t, K, 1, K) =
        (eq.Z.row(t).array() * btilde.row(t).array()).matrix() * s;
    yhat(t) = eq.ylocal(t) * s;
  }
  MatrixXd prec = zhat.transpose() * zhat;
  prec.diagonal() += hs.prior_variance().cwiseInverse();
  auto llt = chol_with_jitter(prec, "constant/scale draw " + label);
  return draw_gaussian_from_precision(llt, zhat.transpose() * yhat, rng);
}

/// Forward-filtering backward-sampling draw of the normalized state paths.
/// Observation: y_t = b0'Z_t + (sqrt_theta .* Z_t)' btilde_t + eta_t with
/// variance h_t tau_t; state: random walk with identity innovation covariance
/// and btilde_0 = 0 exactly.
inline MatrixXd ffbs_states(const EquationData& eq, const VectorXd& b0,
                            const VectorXd& sqrt_theta, Rng& rng,
                            const std::string& label = "") {
  const Eigen::Index T = eq.T();
  const Eigen::Index K = eq.K();
  const MatrixXd I = MatrixXd::Identity(K, K);

  std::vector<VectorXd> filt_mean(T);
  std::vector<MatrixXd> filt_cov(T);

  VectorXd m = VectorXd::Zero(K);
  MatrixXd P = MatrixXd::Zero(K, K);
  for (Eigen::Index t = 0; t < T; ++t) {
    P += I;  // predict through the random walk
    const VectorXd f = sqrt_theta.cwiseProduct(eq.Z.row(t).transpose());
    const double r = eq.h(t) * eq.tau(t);
    const VectorXd pf = P * f;
    const double s = f.dot(pf) + r;
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericalError("filter variance not positive at t=" +
                           std::to_string(t) + " " + label);
    const double innov = eq.ylocal(t) - b0.dot(eq.Z.row(t).transpose()) - f.dot(m);
    m += pf * (innov / s);
    P -= pf * (pf.transpose() / s);
    P = 0.5 * (P + P.transpose());
    filt_mean[t] = m;
    filt_cov[t] = P;
  }

  MatrixXd draws(T, K);
  // sample the terminal state
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(filt_cov[T - 1]);
    VectorXd z(K);
    for (Eigen::Index i = 0; i < K; ++i) z(i) = rng.normal();
    draws.row(T - 1) =
        (filt_mean[T - 1] +
         es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z)
            .transpose();
  }
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    // b_t | b_{t+1}: random walk, predicted covariance P_t + I
    const MatrixXd pred = filt_cov[t] + I;
    Eigen::LLT<MatrixXd> llt(pred);
    if (llt.info() != Eigen::Success)
      llt = chol_with_jitter(pred, "ffbs backward t=" + std::to_string(t) + " " + label);
    const MatrixXd gain = llt.solve(filt_cov[t]).transpose();  // P_t (P_t+I)^-1
    const VectorXd mean =
        filt_mean[t] + gain * (draws.row(t + 1).transpose() - filt_mean[t]);
    MatrixXd cov = filt_cov[t] - gain * filt_cov[t];
    cov = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    VectorXd z(K);
    for (Eigen::Index i = 0; i < K; ++i) z(i) = rng.normal();
    draws.row(t) =
        (mean + es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z)
            .transpose();
  }
  return draws;
}

}  // namespace tvecm
