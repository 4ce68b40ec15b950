#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"

namespace tvecm {

using Eigen::VectorXd;

/// 10-component Gaussian mixture approximation to the log chi-square(1)
/// distribution (Omori, Chib, Shephard and Nakajima, 2007).
struct LogChiSqMixture {
  static constexpr int kComponents = 10;
  static constexpr std::array<double, 10> prob = {
      0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
      0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
  static constexpr std::array<double, 10> mean = {
      1.92677,  1.34744,  0.73504,  0.02266,  -0.85173,
      -1.97278, -3.46788, -5.55246, -8.68384, -14.65000};
  static constexpr std::array<double, 10> var = {
      0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
      0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
};

/// Per-equation log-volatility state: log h_t follows an AR(1) with
/// unconditional mean mu, persistence phi and innovation s.d. sigma.
/// tau/nu are populated only under t-distributed errors.
struct VolState {
  VectorXd logh;
  double mu = 0.0;
  double phi = 0.9;
  double sigma = 0.2;
  VectorXd tau;  // empty when t-errors are off
  double nu = 0.0;

  // diagnostics
  long phi_reject_count = 0;
  long sigma2_accepts = 0;
  long sigma2_proposals = 0;
  long nu_accepts = 0;
  long nu_proposals = 0;
  double nu_proposal_sd = 0.5;

  explicit VolState(Eigen::Index T) : logh(VectorXd::Zero(T)) {}
  Eigen::Index T() const { return logh.size(); }
};

struct SvOptions {
  bool interweave = false;  // extra non-centered (mu, sigma) move
  double offset = 1e-8;     // added to squared residuals before the log
  double nu_lower = 2.0;    // uniform prior bounds on the degrees of freedom
  double nu_upper = 30.0;
  double mu_prior_var = 100.0;
  double phi_beta_a = 5.0;
  double phi_beta_b = 1.5;
};

namespace detail {

inline double beta_log_density(double x, double a, double b) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log(1.0 - x);
}

/// log p(phi) from (phi+1)/2 ~ Beta(a, b) plus the stationary initial-state
/// term for logh_1.
inline double phi_log_target_extras(double phi, double h1_dev, double sigma2,
                                    const SvOptions& opt) {
  const double one_m_phi2 = 1.0 - phi * phi;
  return beta_log_density(0.5 * (phi + 1.0), opt.phi_beta_a, opt.phi_beta_b) +
         0.5 * std::log(one_m_phi2) - one_m_phi2 * h1_dev * h1_dev / (2.0 * sigma2);
}

}  // namespace detail

/// One sweep of the volatility sampler: mixture indicators, FFBS on the
/// linear AR(1) state space for log h, then (mu, phi, sigma).
///
/// `residuals` must be pre-divided by sqrt(tau_t) when t-errors are active,
/// so this step always sees Gaussian-scale residuals.
inline void draw_volatility(const VectorXd& residuals, VolState& vol, Rng& rng,
                            const SvOptions& opt = {}) {
  const Eigen::Index T = residuals.size();
  if (T == 0) throw ContractError("draw_volatility: empty residual slice");
  if (vol.logh.size() != T)
    throw ContractError("draw_volatility: state length mismatch");

  VectorXd ystar(T);
  for (Eigen::Index t = 0; t < T; ++t)
    ystar(t) = std::log(residuals(t) * residuals(t) + opt.offset);

  // 1. mixture indicators, sampled in log space to avoid underflow
  std::vector<int> comp(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    std::array<double, LogChiSqMixture::kComponents> logw;
    double maxw = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < LogChiSqMixture::kComponents; ++j) {
      const double d = ystar(t) - vol.logh(t) - LogChiSqMixture::mean[j];
      logw[j] = std::log(LogChiSqMixture::prob[j]) -
                0.5 * std::log(LogChiSqMixture::var[j]) -
                0.5 * d * d / LogChiSqMixture::var[j];
      maxw = std::max(maxw, logw[j]);
    }
    double total = 0.0;
    for (int j = 0; j < LogChiSqMixture::kComponents; ++j) {
      logw[j] = std::exp(logw[j] - maxw);
      total += logw[j];
    }
    double u = rng.uniform() * total;
    int pick = LogChiSqMixture::kComponents - 1;
    for (int j = 0; j < LogChiSqMixture::kComponents; ++j) {
      u -= logw[j];
      if (u <= 0.0) {
        pick = j;
        break;
      }
    }
    comp[t] = pick;
  }

  // 2. FFBS for logh on the conditionally Gaussian model
  const double sigma2 = vol.sigma * vol.sigma;
  const double phi = vol.phi;
  const double mu = vol.mu;
  VectorXd fm(T), fP(T);
  {
    double m = mu;
    double P = sigma2 / (1.0 - phi * phi);  // stationary initial state
    for (Eigen::Index t = 0; t < T; ++t) {
      if (t > 0) {
        m = mu + phi * (m - mu);
        P = phi * phi * P + sigma2;
      }
      const double obs = ystar(t) - LogChiSqMixture::mean[comp[t]];
      const double R = LogChiSqMixture::var[comp[t]];
      const double S = P + R;
      const double gain = P / S;
      m += gain * (obs - m);
      P *= (1.0 - gain);
      fm(t) = m;
      fP(t) = P;
    }
    vol.logh(T - 1) = rng.normal(fm(T - 1), std::sqrt(std::max(fP(T - 1), 0.0)));
    for (Eigen::Index t = T - 2; t >= 0; --t) {
      const double Ppred = phi * phi * fP(t) + sigma2;
      const double J = Ppred > 0.0 ? phi * fP(t) / Ppred : 0.0;
      const double mean =
          fm(t) + J * (vol.logh(t + 1) - (mu + phi * (fm(t) - mu)));
      const double var = fP(t) - J * phi * fP(t);
      vol.logh(t) = rng.normal(mean, std::sqrt(std::max(var, 0.0)));
    }
  }

  // 3. mu | logh, phi, sigma2 (conjugate Gaussian, stationary term for t=1)
  {
    const double one_m_phi = 1.0 - phi;
    const double one_m_phi2 = 1.0 - phi * phi;
    double prec = one_m_phi2 / sigma2 + 1.0 / opt.mu_prior_var;
    double rhs = one_m_phi2 / sigma2 * vol.logh(0);
    for (Eigen::Index t = 1; t < T; ++t) {
      prec += one_m_phi * one_m_phi / sigma2;
      rhs += one_m_phi / sigma2 * (vol.logh(t) - phi * vol.logh(t - 1));
    }
    vol.mu = rng.normal(rhs / prec, std::sqrt(1.0 / prec));
  }

  // 4. phi: Gaussian proposal from the transition regression, MH-corrected
  //    for the Beta prior and the stationary initial-state term
  {
    double sxx = 0.0, sxy = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) {
      const double xlag = vol.logh(t - 1) - vol.mu;
      sxx += xlag * xlag;
      sxy += xlag * (vol.logh(t) - vol.mu);
    }
    if (sxx > 0.0) {
      const double prop_mean = sxy / sxx;
      const double prop_sd = std::sqrt(sigma2 / sxx);
      const double prop = rng.normal(prop_mean, prop_sd);
      if (std::abs(prop) >= 1.0) {
        ++vol.phi_reject_count;
      } else {
        const double h1_dev = vol.logh(0) - vol.mu;
        const double log_ratio =
            detail::phi_log_target_extras(prop, h1_dev, sigma2, opt) -
            detail::phi_log_target_extras(vol.phi, h1_dev, sigma2, opt);
        if (std::log(rng.uniform() + 1e-300) < log_ratio) vol.phi = prop;
      }
    }
  }

  // 5. sigma2: independence MH. Proposal InvGamma((T-1)/2, SSE/2) matches the
  //    likelihood factors exactly; the Gamma(1/2, 1/2) prior on sigma2
  //    (from sigma ~ N(0,1)) enters through exp(-(new - old)/2).
  {
    const double one_m_phi2 = 1.0 - vol.phi * vol.phi;
    double sse = one_m_phi2 * (vol.logh(0) - vol.mu) * (vol.logh(0) - vol.mu);
    for (Eigen::Index t = 1; t < T; ++t) {
      const double e = (vol.logh(t) - vol.mu) - vol.phi * (vol.logh(t - 1) - vol.mu);
      sse += e * e;
    }
    ++vol.sigma2_proposals;
    const double prop = rng.inv_gamma((static_cast<double>(T) - 1.0) / 2.0, sse / 2.0);
    const double log_ratio = -(prop - sigma2) / 2.0;
    if (std::log(rng.uniform() + 1e-300) < log_ratio) {
      vol.sigma = std::sqrt(prop);
      ++vol.sigma2_accepts;
    }
  }

  // 6. optional interweaving: re-draw (mu, sigma) in the non-centered
  //    parameterization where both are regression coefficients, then map
  //    logh back. Priors: mu ~ N(0, mu_prior_var), sigma ~ N(0, 1).
  if (opt.interweave && vol.sigma > 0.0) {
    VectorXd htilde = (vol.logh.array() - vol.mu) / vol.sigma;
    Eigen::Matrix2d prec = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (Eigen::Index t = 0; t < T; ++t) {
      const double R = LogChiSqMixture::var[comp[t]];
      const double obs = ystar(t) - LogChiSqMixture::mean[comp[t]];
      Eigen::Vector2d reg(1.0, htilde(t));
      prec += reg * reg.transpose() / R;
      rhs += reg * obs / R;
    }
    prec(0, 0) += 1.0 / opt.mu_prior_var;
    prec(1, 1) += 1.0;
    Eigen::LLT<Eigen::Matrix2d> llt(prec);
    if (llt.info() == Eigen::Success) {
      Eigen::Vector2d mean = llt.solve(rhs);
      Eigen::Vector2d z(rng.normal(), rng.normal());
      Eigen::Vector2d draw = mean + llt.matrixU().solve(z);
      vol.mu = draw(0);
      vol.sigma = std::abs(draw(1));  // sign-free root
      vol.logh = vol.mu + (draw(1) * htilde.array());
    }
  }
}

/// Conjugate update of the t-error auxiliary scales:
/// tau_t ~ InvGamma((nu+1)/2, (nu + eta_t^2 / h_t) / 2).
/// `residuals` are the raw structural residuals eta_t.
inline VectorXd draw_tau(const VectorXd& residuals, const VectorXd& logh,
                         double nu, Rng& rng) {
  if (!(nu > 2.0)) throw ContractError("draw_tau: nu must exceed 2");
  if (residuals.size() != logh.size())
    throw ContractError("draw_tau: length mismatch");
  VectorXd tau(residuals.size());
  for (Eigen::Index t = 0; t < residuals.size(); ++t) {
    const double scaled = residuals(t) * residuals(t) / std::exp(logh(t));
    tau(t) = rng.inv_gamma((nu + 1.0) / 2.0, (nu + scaled) / 2.0);
    tau(t) = std::max(tau(t), 1e-12);
  }
  return tau;
}

namespace detail {

inline double nu_log_conditional(double nu, const VectorXd& tau) {
  const double half = nu / 2.0;
  double lp = tau.size() * (half * std::log(half) - std::lgamma(half));
  for (Eigen::Index t = 0; t < tau.size(); ++t)
    lp += -(half + 1.0) * std::log(tau(t)) - half / tau(t);
  return lp;
}

}  // namespace detail

/// Random-walk Metropolis on log(nu - lower) targeting p(nu | tau) under a
/// Uniform(lower, upper) prior. When `adapt` is set, the proposal s.d. is
/// nudged toward a 25-40% acceptance rate.
inline double draw_nu(const VectorXd& tau, VolState& vol, Rng& rng, bool adapt,
                      const SvOptions& opt = {}) {
  if (tau.size() == 0) throw ContractError("draw_nu: empty tau");
  const double lo = opt.nu_lower, hi = opt.nu_upper;
  const double cur = vol.nu;
  const double cur_x = std::log(cur - lo);
  const double prop_x = cur_x + vol.nu_proposal_sd * rng.normal();
  const double prop = lo + std::exp(prop_x);
  ++vol.nu_proposals;
  bool accepted = false;
  if (prop < hi) {
    // Jacobian of nu -> log(nu - lo) contributes (nu - lo) to the target
    const double log_ratio = detail::nu_log_conditional(prop, tau) -
                             detail::nu_log_conditional(cur, tau) +
                             std::log(prop - lo) - std::log(cur - lo);
    if (std::log(rng.uniform() + 1e-300) < log_ratio) {
      vol.nu = prop;
      accepted = true;
    }
  }
  if (accepted) ++vol.nu_accepts;
  if (adapt && vol.nu_proposals % 50 == 0) {
    const double rate =
        static_cast<double>(vol.nu_accepts) / static_cast<double>(vol.nu_proposals);
    if (rate < 0.25)
      vol.nu_proposal_sd = std::max(0.01, vol.nu_proposal_sd * 0.9);
    else if (rate > 0.40)
      vol.nu_proposal_sd = std::min(5.0, vol.nu_proposal_sd * 1.1);
  }
  return vol.nu;
}

}  // namespace tvecm
