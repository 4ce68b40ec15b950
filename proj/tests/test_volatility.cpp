#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tvecm/volatility.hpp"

using namespace tvecm;

TEST_CASE("mixture constants form a probability distribution") {
  double total = 0.0;
  for (double p : LogChiSqMixture::prob) total += p;
  CHECK(total == Catch::Approx(1.0).margin(1e-8));
  // mixture mean should be close to E[log chi2_1] = -1.2704
  double mean = 0.0;
  for (int j = 0; j < 10; ++j) mean += LogChiSqMixture::prob[j] * LogChiSqMixture::mean[j];
  CHECK(mean == Catch::Approx(-1.2704).margin(0.01));
}

TEST_CASE("draw_volatility rejects an empty residual slice") {
  VolState vol(0);
  Rng rng(1);
  CHECK_THROWS_AS(draw_volatility(VectorXd(), vol, rng), ContractError);
}

TEST_CASE("constant-variance data: exp(mu) near 1, |phi| mass below 0.9") {
  const Eigen::Index T = 2000;
  Rng rng(13);
  VectorXd resid(T);
  for (Eigen::Index t = 0; t < T; ++t) resid(t) = rng.normal();

  VolState vol(T);
  const int burn = 300, draws = 700;
  double mu_sum = 0.0;
  int phi_below = 0;
  for (int i = 0; i < burn + draws; ++i) {
    draw_volatility(resid, vol, rng);
    if (i >= burn) {
      mu_sum += vol.mu;
      if (std::abs(vol.phi) < 0.9) ++phi_below;
    }
  }
  const double exp_mu = std::exp(mu_sum / draws);
  CHECK(exp_mu > 0.8);
  CHECK(exp_mu < 1.25);
  CHECK(static_cast<double>(phi_below) / draws > 0.5);
}

TEST_CASE("h stays positive and forecasting propagation matches the AR(1) law") {
  Rng rng(17);
  const Eigen::Index T = 300;
  VectorXd resid(T);
  for (Eigen::Index t = 0; t < T; ++t) resid(t) = 0.5 * rng.normal();
  VolState vol(T);
  for (int i = 0; i < 50; ++i) draw_volatility(resid, vol, rng);
  CHECK(vol.logh.array().exp().minCoeff() > 0.0);
  // one-step propagation used by forecasting
  const double xi = 0.3;
  const double next = vol.mu + vol.phi * (vol.logh(T - 1) - vol.mu) + vol.sigma * xi;
  CHECK(std::isfinite(next));
  CHECK(std::exp(next) > 0.0);
}

TEST_CASE("draw_tau conjugate algebra") {
  Rng rng(19);
  SECTION("nu = 4, eta^2/h = 4: InvGamma(2.5, 4) mean 4/1.5") {
    const int n = 100000;
    VectorXd resid = VectorXd::Constant(1, 2.0);  // eta^2 = 4
    VectorXd logh = VectorXd::Zero(1);            // h = 1
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      double tau = draw_tau(resid, logh, 4.0, rng)(0);
      sum += tau;
      sumsq += tau * tau;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - 4.0 / 1.5) < 3.0 * se);
  }
  SECTION("large nu concentrates tau at 1") {
    const double nu = 1e6;
    VectorXd resid = VectorXd::Zero(200);
    VectorXd logh = VectorXd::Zero(200);
    VectorXd tau = draw_tau(resid, logh, nu, rng);
    CHECK(std::abs(tau.mean() - 1.0) < 0.01);
    const double spread = std::sqrt((tau.array() - tau.mean()).square().mean());
    CHECK(spread / tau.mean() < 0.01);
  }
  SECTION("nu <= 2 is rejected") {
    CHECK_THROWS_AS(draw_tau(VectorXd::Zero(3), VectorXd::Zero(3), 2.0, rng),
                    ContractError);
  }
}

TEST_CASE("draw_nu: near-Gaussian tau pushes nu to the upper prior bound") {
  Rng rng(23);
  const Eigen::Index T = 2000;
  // tau generated with very large nu: essentially all 1
  VectorXd tau(T);
  const double nu_true = 100.0;
  for (Eigen::Index t = 0; t < T; ++t)
    tau(t) = rng.inv_gamma(nu_true / 2.0, nu_true / 2.0);
  VolState vol(T);
  vol.nu = 10.0;
  double sum = 0.0;
  const int burn = 500, draws = 2000;
  for (int i = 0; i < burn + draws; ++i) {
    draw_nu(tau, vol, rng, i < burn);
    if (i >= burn) sum += vol.nu;
  }
  CHECK(sum / draws > 25.0);  // piles near the bound at 30
}

TEST_CASE("draw_nu recovers nu = 5 from InvGamma(nu/2, nu/2) scales") {
  Rng rng(29);
  const Eigen::Index T = 2000;
  VectorXd tau(T);
  for (Eigen::Index t = 0; t < T; ++t) tau(t) = rng.inv_gamma(2.5, 2.5);
  VolState vol(T);
  vol.nu = 10.0;
  double sum = 0.0;
  const int burn = 500, draws = 2000;
  for (int i = 0; i < burn + draws; ++i) {
    draw_nu(tau, vol, rng, i < burn);
    if (i >= burn) sum += vol.nu;
  }
  const double mean = sum / draws;
  CHECK(mean > 4.0);
  CHECK(mean < 6.5);
}

TEST_CASE("mixture approximation agrees with an exact-likelihood Metropolis oracle") {
  // single-site random-walk Metropolis with the exact log chi-square
  // observation density, run on the same data with fixed (mu, phi, sigma)
  Rng rng(31);
  const Eigen::Index T = 60;
  const double mu = -0.5, phi = 0.9, sigma = 0.25;
  VectorXd logh_true(T), resid(T);
  logh_true(0) = mu + sigma / std::sqrt(1 - phi * phi) * rng.normal();
  for (Eigen::Index t = 1; t < T; ++t)
    logh_true(t) = mu + phi * (logh_true(t - 1) - mu) + sigma * rng.normal();
  for (Eigen::Index t = 0; t < T; ++t)
    resid(t) = std::exp(0.5 * logh_true(t)) * rng.normal();

  // oracle: exact conditional p(logh_t | rest) via RW Metropolis
  auto log_target = [&](Eigen::Index t, double v, const VectorXd& lh) {
    double lp = -0.5 * (v + resid(t) * resid(t) * std::exp(-v));
    if (t == 0) {
      lp += -0.5 * (v - mu) * (v - mu) * (1 - phi * phi) / (sigma * sigma);
    } else {
      double e = (v - mu) - phi * (lh(t - 1) - mu);
      lp += -0.5 * e * e / (sigma * sigma);
    }
    if (t + 1 < T) {
      double e = (lh(t + 1) - mu) - phi * (v - mu);
      lp += -0.5 * e * e / (sigma * sigma);
    }
    return lp;
  };
  Rng orng(33);
  VectorXd lh = VectorXd::Constant(T, mu);
  VectorXd oracle_mean = VectorXd::Zero(T);
  const int osweeps = 60000, oburn = 5000;
  for (int i = 0; i < osweeps; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      double prop = lh(t) + 0.6 * orng.normal();
      if (std::log(orng.uniform() + 1e-300) <
          log_target(t, prop, lh) - log_target(t, lh(t), lh))
        lh(t) = prop;
    }
    if (i >= oburn) oracle_mean += lh;
  }
  oracle_mean /= (osweeps - oburn);

  // mixture sampler with the same fixed parameters
  VolState vol(T);
  vol.mu = mu;
  vol.phi = phi;
  vol.sigma = sigma;
  VectorXd mix_mean = VectorXd::Zero(T);
  VectorXd mix_sq = VectorXd::Zero(T);
  const int msweeps = 20000, mburn = 2000;
  for (int i = 0; i < msweeps; ++i) {
    // freeze (mu, phi, sigma) by restoring them after the sweep
    draw_volatility(resid, vol, rng);
    vol.mu = mu;
    vol.phi = phi;
    vol.sigma = sigma;
    if (i >= mburn) {
      mix_mean += vol.logh;
      mix_sq += vol.logh.cwiseProduct(vol.logh);
    }
  }
  const int kept = msweeps - mburn;
  mix_mean /= kept;
  mix_sq /= kept;
  int misses = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double var = std::max(mix_sq(t) - mix_mean(t) * mix_mean(t), 0.0);
    // combined error allowance: MC error of both samplers plus the known
    // O(1e-2) bias of the 10-component approximation
    const double tol = 3.0 * std::sqrt(var / kept * 20.0) + 0.05;
    if (std::abs(mix_mean(t) - oracle_mean(t)) > tol) ++misses;
  }
  CHECK(misses <= 3);
}

TEST_CASE("gaussian path equals tau = 1 path bit-for-bit given the same seed") {
  const Eigen::Index T = 150;
  Rng data_rng(37);
  VectorXd resid(T);
  for (Eigen::Index t = 0; t < T; ++t) resid(t) = 0.7 * data_rng.normal();

  VolState a(T), b(T);
  b.tau = VectorXd::Ones(T);
  Rng ra(99), rb(99);
  for (int i = 0; i < 20; ++i) {
    draw_volatility(resid, a, ra);
    VectorXd scaled = resid.cwiseQuotient(b.tau.cwiseSqrt());
    draw_volatility(scaled, b, rb);
  }
  CHECK((a.logh - b.logh).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.mu == b.mu);
  CHECK(a.phi == b.phi);
  CHECK(a.sigma == b.sigma);
}
