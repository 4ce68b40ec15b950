#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tvecm/data.hpp"
#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"

namespace tvecm {

/// Recipe for a synthetic cointegrated system with known truth:
/// dy_t = Pi y_{t-1} + A_t dy_{t-1} + eps_t, eps_it = exp(h_it/2) sqrt(tau) z.
struct SynthSpec {
  Eigen::Index M = 4;
  Eigen::Index T = 600;  // design rows after lag trimming
  int rank = 2;
  double tvp_amplitude = 0.0;  // random-walk drift scale on the diagonal of A
  double sv_mu = -1.0;
  double sv_phi = 0.95;
  double sv_sigma = 0.2;
  bool student_t = false;
  double nu = 5.0;
  double a_diag = 0.35;     // the non-zero short-run coefficients
  double signal_gain = 1.0;  // loading of the equilibrium errors on the
                             // non-cointegrated directions
  std::uint64_t seed = 1;
};

struct SynthTruth {
  MatrixXd pi;                  // M x M, constant over t
  std::vector<MatrixXd> a;      // per design row, M x M short-run block
  std::vector<int> rank_path;   // per design row
  double sv_mu = 0.0, sv_phi = 0.0, sv_sigma = 0.0, nu = 0.0;
  MatrixXd logh;                // design rows x M
};

struct SynthData {
  Panel panel;
  SynthTruth truth;
};

/// Generate levels with an exact known Pi = -c B B' (B orthonormal M x rank),
/// rescaling c until the companion matrix is comfortably stable.
inline SynthData generate_synth(const SynthSpec& spec) {
  if (spec.rank < 0 || spec.rank >= spec.M)
    throw ValidationError("synthetic rank must lie in [0, M-1]");
  if (spec.T < 10) throw ValidationError("synthetic T too small");
  Rng rng(spec.seed);
  const Eigen::Index M = spec.M;
  const int P = 1;
  const Eigen::Index warmup = 200;
  const Eigen::Index t_raw = spec.T + P + 1 + warmup;

  MatrixXd pi = MatrixXd::Zero(M, M);
  if (spec.rank > 0) {
    MatrixXd raw(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < M; ++j) raw(i, j) = rng.normal();
    Eigen::HouseholderQR<MatrixXd> qr(raw);
    const MatrixXd Q = qr.householderQ();
    const MatrixXd B = Q.leftCols(spec.rank);       // cointegration space
    const MatrixXd Bperp = Q.rightCols(M - spec.rank);
    MatrixXd Fraw(M - spec.rank, spec.rank);
    for (Eigen::Index i = 0; i < M - spec.rank; ++i)
      for (int j = 0; j < spec.rank; ++j) Fraw(i, j) = rng.normal();
    // orthonormalize F so alpha is a scaled partial isometry: every signal
    // direction then carries the same strength instead of a random spread
    MatrixXd F;
    if (M - spec.rank >= spec.rank) {
      Eigen::HouseholderQR<MatrixXd> fqr(Fraw);
      F = MatrixXd(fqr.householderQ()).leftCols(spec.rank);
    } else {
      Eigen::HouseholderQR<MatrixXd> fqr(Fraw.transpose());
      F = MatrixXd(fqr.householderQ()).leftCols(M - spec.rank).transpose();
    }

    // alpha = -c B + g Bperp F keeps the equilibrium errors B'y stationary
    // while the gain g amplifies the error-correction signal elsewhere
    double c = 0.5, g = spec.signal_gain;
    for (int attempt = 0; attempt < 30; ++attempt) {
      const MatrixXd alpha = -c * B + g * Bperp * F;
      pi = alpha * B.transpose();
      // companion matrix of the implied levels VAR(2); a cointegrated system
      // carries M - rank unit roots, everything else must be well inside
      MatrixXd comp = MatrixXd::Zero(2 * M, 2 * M);
      MatrixXd a0 = spec.a_diag * MatrixXd::Identity(M, M);
      comp.topLeftCorner(M, M) = MatrixXd::Identity(M, M) + pi + a0;
      comp.topRightCorner(M, M) = -a0;
      comp.bottomLeftCorner(M, M) = MatrixXd::Identity(M, M);
      const VectorXd mags = comp.eigenvalues().cwiseAbs();
      int near_unit = 0;
      double max_inside = 0.0;
      for (Eigen::Index i = 0; i < mags.size(); ++i) {
        if (mags(i) > 0.995) ++near_unit;
        else max_inside = std::max(max_inside, mags(i));
      }
      if (mags.maxCoeff() < 1.0 + 1e-6 && near_unit == M - spec.rank &&
          max_inside < 0.99)
        break;
      c *= 0.8;
      g *= 0.8;
    }
  }

  SynthData out;
  out.truth.pi = pi;
  out.truth.sv_mu = spec.sv_mu;
  out.truth.sv_phi = spec.sv_phi;
  out.truth.sv_sigma = spec.sv_sigma;
  out.truth.nu = spec.student_t ? spec.nu : 0.0;
  out.truth.logh.resize(spec.T, M);

  MatrixXd levels(t_raw, M);
  levels.row(0).setZero();
  levels.row(1).setZero();
  VectorXd logh(M), a_drift = VectorXd::Zero(M);
  for (Eigen::Index i = 0; i < M; ++i)
    logh(i) = spec.sv_mu + spec.sv_sigma /
                               std::sqrt(1.0 - spec.sv_phi * spec.sv_phi) *
                               rng.normal();

  const Eigen::Index design_start = warmup + P + 1;
  for (Eigen::Index s = 2; s < t_raw; ++s) {
    for (Eigen::Index i = 0; i < M; ++i) {
      logh(i) = spec.sv_mu + spec.sv_phi * (logh(i) - spec.sv_mu) +
                spec.sv_sigma * rng.normal();
      if (spec.tvp_amplitude > 0.0)
        a_drift(i) += spec.tvp_amplitude * rng.normal();
    }
    MatrixXd a_now = spec.a_diag * MatrixXd::Identity(M, M);
    a_now.diagonal() += a_drift;
    a_now.diagonal() = a_now.diagonal().cwiseMax(-0.9).cwiseMin(0.9);

    const VectorXd dy_prev = (levels.row(s - 1) - levels.row(s - 2)).transpose();
    VectorXd eps(M);
    for (Eigen::Index i = 0; i < M; ++i) {
      const double tau =
          spec.student_t ? rng.inv_gamma(spec.nu / 2.0, spec.nu / 2.0) : 1.0;
      eps(i) = std::exp(0.5 * logh(i)) * std::sqrt(tau) * rng.normal();
    }
    const VectorXd dy =
        pi * levels.row(s - 1).transpose() + a_now * dy_prev + eps;
    levels.row(s) = levels.row(s - 1) + dy.transpose();

    if (s >= design_start) {
      const Eigen::Index t = s - design_start;
      out.truth.a.push_back(a_now);
      out.truth.rank_path.push_back(spec.rank);
      out.truth.logh.row(t) = logh.transpose();
    }
  }

  out.panel.levels = levels.bottomRows(spec.T + P + 1);
  out.panel.factors.resize(spec.T + P + 1, 0);
  out.panel.scales = VectorXd::Ones(M);
  const std::int64_t day0 = days_from_civil(2020, 1, 1) * 86400;
  for (Eigen::Index r = 0; r < spec.T + P + 1; ++r)
    out.panel.timestamps.push_back(day0 + r * 86400);
  for (Eigen::Index i = 0; i < M; ++i)
    out.panel.names.push_back("y" + std::to_string(i));
  return out;
}

}  // namespace tvecm
