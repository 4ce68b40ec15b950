#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"

namespace tvecm {

using Eigen::VectorXd;

/// Horseshoe hierarchy over a stacked coefficient vector of length 2K:
/// the first K entries are the constant coefficients (group b), the second K
/// the state-scale roots (group theta). Each group carries its own global
/// variance with an auxiliary scale.
///
/// Conditionals follow the standard auxiliary-variable horseshoe: the local
/// variance psi gets the coefficient-dependent InvGamma(1, .) update and its
/// auxiliary rho gets InvGamma(1, 1 + 1/psi). All variances are clamped to
/// [1e-12, 1e12]; clamping events are counted in `clamp_count`.
struct HorseshoeState {
  VectorXd psi;           // 2K local variances
  VectorXd rho;           // 2K local auxiliaries
  double varrho_b = 1.0;  // global variance, group b
  double varrho_theta = 1.0;
  double varpi_b = 1.0;  // global auxiliaries
  double varpi_theta = 1.0;
  long clamp_count = 0;

  static constexpr double kFloor = 1e-12;
  static constexpr double kCeil = 1e12;

  explicit HorseshoeState(Eigen::Index k_i)
      : psi(VectorXd::Ones(2 * k_i)), rho(VectorXd::Ones(2 * k_i)) {}

  Eigen::Index k() const { return psi.size() / 2; }
  bool in_group_b(Eigen::Index j) const { return j < k(); }

  double clamp(double v) {
    if (!(v >= kFloor)) {
      ++clamp_count;
      return kFloor;
    }
    if (v > kCeil) {
      ++clamp_count;
      return kCeil;
    }
    return v;
  }

  /// Prior variance vector v_j = varrho_k * psi_j with k chosen by group.
  VectorXd prior_variance() const {
    VectorXd v(psi.size());
    for (Eigen::Index j = 0; j < psi.size(); ++j)
      v(j) = (in_group_b(j) ? varrho_b : varrho_theta) * psi(j);
    return v;
  }

  /// Local variances and their auxiliaries given the current coefficients.
  void update_local(const VectorXd& bhat, Rng& rng) {
    if (bhat.size() != psi.size())
      throw ContractError("update_local: coefficient length mismatch");
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
      const double g = in_group_b(j) ? varrho_b : varrho_theta;
      const double rate = 1.0 / rho(j) + bhat(j) * bhat(j) / (2.0 * g);
      psi(j) = clamp(rng.inv_gamma(1.0, clamp(rate)));
      rho(j) = clamp(rng.inv_gamma(1.0, 1.0 + 1.0 / psi(j)));
    }
  }

  /// Group-global variances and their auxiliaries.
  void update_global(const VectorXd& bhat, Rng& rng) {
    if (bhat.size() != psi.size())
      throw ContractError("update_global: coefficient length mismatch");
    const Eigen::Index K = k();
    const double shape = (static_cast<double>(K) + 1.0) / 2.0;
    double data_b = 0.0, data_t = 0.0;
    for (Eigen::Index j = 0; j < K; ++j)
      data_b += bhat(j) * bhat(j) / psi(j);
    for (Eigen::Index j = K; j < 2 * K; ++j)
      data_t += bhat(j) * bhat(j) / psi(j);
    varrho_b = clamp(rng.inv_gamma(shape, clamp(1.0 / varpi_b + 0.5 * data_b)));
    varrho_theta =
        clamp(rng.inv_gamma(shape, clamp(1.0 / varpi_theta + 0.5 * data_t)));
    varpi_b = clamp(rng.inv_gamma(1.0, 1.0 + 1.0 / varrho_b));
    varpi_theta = clamp(rng.inv_gamma(1.0, 1.0 + 1.0 / varrho_theta));
  }

  /// Draw the full hierarchy from its prior (used by prior-sampling checks).
  void draw_prior(Rng& rng) {
    varpi_b = clamp(rng.inv_gamma(0.5, 1.0));
    varpi_theta = clamp(rng.inv_gamma(0.5, 1.0));
    varrho_b = clamp(rng.inv_gamma(0.5, 1.0 / varpi_b));
    varrho_theta = clamp(rng.inv_gamma(0.5, 1.0 / varpi_theta));
    for (Eigen::Index j = 0; j < psi.size(); ++j) {
      rho(j) = clamp(rng.inv_gamma(0.5, 1.0));
      psi(j) = clamp(rng.inv_gamma(0.5, 1.0 / rho(j)));
    }
  }
};

}  // namespace tvecm
