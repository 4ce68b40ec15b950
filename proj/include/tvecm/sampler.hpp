#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "tvecm/cointegration.hpp"
#include "tvecm/data.hpp"
#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"
#include "tvecm/sparsify.hpp"
#include "tvecm/states.hpp"
#include "tvecm/volatility.hpp"

namespace tvecm {

enum class ModelClass {
  Vecm,
  VecmFixedRank,
  VarLevels,
  VarDifferences,
  ArLevels,
  ArDifferences,
};

enum class ErrorDist { Gaussian, StudentT };

inline std::string to_string(ModelClass mc) {
  switch (mc) {
    case ModelClass::Vecm: return "vecm";
    case ModelClass::VecmFixedRank: return "vecm-fixed-rank";
    case ModelClass::VarLevels: return "var-levels";
    case ModelClass::VarDifferences: return "var-differences";
    case ModelClass::ArLevels: return "ar-levels";
    case ModelClass::ArDifferences: return "ar-differences";
  }
  return "?";
}

inline ModelClass model_class_from_string(const std::string& s) {
  if (s == "vecm") return ModelClass::Vecm;
  if (s == "vecm-fixed-rank") return ModelClass::VecmFixedRank;
  if (s == "var-levels") return ModelClass::VarLevels;
  if (s == "var-differences") return ModelClass::VarDifferences;
  if (s == "ar-levels") return ModelClass::ArLevels;
  if (s == "ar-differences") return ModelClass::ArDifferences;
  throw ValidationError("unknown model class '" + s + "'");
}

inline std::string to_string(ErrorDist e) {
  return e == ErrorDist::Gaussian ? "gaussian" : "student-t";
}

inline ErrorDist error_dist_from_string(const std::string& s) {
  if (s == "gaussian") return ErrorDist::Gaussian;
  if (s == "student-t") return ErrorDist::StudentT;
  throw ValidationError("unknown error distribution '" + s + "'");
}

struct ModelConfig {
  ModelClass model_class = ModelClass::Vecm;
  int fixed_rank = 1;  // only read for VecmFixedRank
  bool tvp = true;
  ErrorDist error_dist = ErrorDist::Gaussian;
  int P = 1;
  int draws = 6000;
  int burnin = 2000;
  int thin = 3;
  std::uint64_t seed = 1;
  double s0 = 0.1;
  SvOptions sv;
  GlassoOptions glasso;
  bool sparsify = true;       // step 8, effective for the plain VECM class
  bool phi_per_draw = true;   // recompute the rank threshold every draw
  bool store_paths = false;   // keep full per-t paths in memory per draw
  bool prior_only = false;    // likelihood disabled: every stage samples its prior
  bool instrument = false;    // record the per-sweep stage sequence
  std::vector<int> equation_order;  // permutation; empty = data column order

  int retained() const {
    return draws > burnin ? (draws - burnin) / thin : 0;
  }

  /// Collects every violation before throwing so users see all of them at once.
  void validate() const {
    std::vector<std::string> bad;
    if (draws <= 0) bad.push_back("draws must be positive");
    if (burnin < 0) bad.push_back("burnin must be non-negative");
    if (burnin >= draws) bad.push_back("burnin must be below draws");
    if (thin < 1) bad.push_back("thin must be >= 1");
    if (P < 1) bad.push_back("lag order P must be >= 1");
    if (!(s0 > 0.0)) bad.push_back("s0 must be positive");
    if (model_class == ModelClass::VecmFixedRank && fixed_rank < 1)
      bad.push_back("fixed rank must be >= 1");
    if (!bad.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& b : bad) msg += " [" + b + "]";
      throw ValidationError(msg);
    }
  }
};

/// Design after model-class remapping: target y, cointegration block w
/// (zero columns when disabled) and the lag/deterministic regressors x.
struct EffectiveDesign {
  MatrixXd y;
  MatrixXd w;
  MatrixXd x;
  bool levels_target = false;

  Eigen::Index T() const { return y.rows(); }
  Eigen::Index M() const { return y.cols(); }
  Eigen::Index q() const { return w.cols(); }
  Eigen::Index J() const { return x.cols(); }
};

/// Map the shared design onto a model class. The VAR/AR level variants
/// reconstruct lagged levels from the stored differences, so they reuse the
/// same design object as every other class.
inline EffectiveDesign remap_design(const Design& d, ModelClass mc) {
  const Eigen::Index T = d.T();
  const Eigen::Index M = d.M;
  const Eigen::Index q_f = d.q_f;
  EffectiveDesign e;
  switch (mc) {
    case ModelClass::Vecm:
    case ModelClass::VecmFixedRank:
      e.y = d.dy;
      e.w = d.w;
      e.x = d.x;
      break;
    case ModelClass::VarDifferences:
    case ModelClass::ArDifferences:
      e.y = d.dy;
      e.w.resize(T, 0);
      e.x = d.x;
      break;
    case ModelClass::VarLevels:
    case ModelClass::ArLevels: {
      e.levels_target = true;
      e.y = d.dy + d.w.leftCols(M);
      e.w.resize(T, 0);
      e.x.resize(T, M * d.P + q_f + d.N);
      for (Eigen::Index t = 0; t < T; ++t) {
        // lag-p level = lag-(p-1) level minus the stored difference block
        Eigen::RowVectorXd level = d.w.block(t, 0, 1, M);
        e.x.block(t, 0, 1, M) = level;
        for (int p = 1; p < d.P; ++p) {
          level -= d.x.block(t, (p - 1) * M, 1, M);
          e.x.block(t, p * M, 1, M) = level;
        }
        if (q_f > 0) e.x.block(t, M * d.P, 1, q_f) = d.w.block(t, M, 1, q_f);
        if (d.N > 0)
          e.x.block(t, M * d.P + q_f, 1, d.N) = d.x.block(t, M * d.P, 1, d.N);
      }
      break;
    }
  }
  return e;
}

/// State at the final in-sample period, sufficient to simulate one step ahead.
struct EquationTerminal {
  VectorXd b0;
  VectorXd sqrt_theta;
  VectorXd btilde_last;
  double logh_last = 0.0;
  double mu = 0.0;
  double phi = 0.0;
  double sigma = 0.0;
  double nu = 0.0;
};

struct SparseDraw {
  std::vector<MatrixXd> pi_star;    // per t, M x q
  std::vector<MatrixXd> a_star;     // per t, M x J
  std::vector<MatrixXd> prec_star;  // per t, M x M
  std::vector<int> rank;            // per t
  double phi = 0.0;                 // rank threshold used
};

struct Draw {
  std::vector<EquationTerminal> eq;  // M entries in equation order
  MatrixXd beta;                     // q x rc; 0x0 without a cointegration block
  MatrixXd logh;                     // T x M

  // full paths, populated only under store_paths
  std::vector<MatrixXd> pi;           // per t, M x q
  std::vector<MatrixXd> a;            // per t, M x J
  std::vector<SigmaFactor> sigma_t;   // per t
  SparseDraw sparse;                  // paths under store_paths; rank always
};

struct DrawArchive {
  ModelConfig config;
  Eigen::Index T = 0, M = 0, q = 0, J = 0, rc = 0;
  bool levels_target = false;
  std::vector<Draw> draws;

  // streaming posterior summaries over retained draws
  std::vector<MatrixXd> pi_mean;  // per t (sparsified mean when sparsifying)
  std::vector<MatrixXd> pip_pi;   // per t, share of non-zero sparsified draws
  std::vector<MatrixXd> pip_a;    // per t, M x J
  MatrixXd ppr;                   // (max_rank+1) x T rank probabilities
  std::vector<std::vector<int>> rank_paths;

  // diagnostics
  std::vector<std::string> stage_log;
  long clamp_events = 0;
  long phi_rejects = 0;
  long skipped_normalizations = 0;
  long floored_eigenvalues = 0;
  double max_residual_gap = 0.0;
  double runtime_seconds = 0.0;
};

namespace detail {

inline void check_finite(const MatrixXd& m, const std::string& what, int sweep) {
  if (!m.allFinite())
    throw NumericalError("NaN in retained draw (sweep " + std::to_string(sweep) +
                         "): " + what);
}

}  // namespace detail

/// Full Gibbs run. Stage order per sweep: (i) rebuild z from the current beta,
/// (ii) serial pass over equations (constants/scales, shrinkage, state paths,
/// residuals), (iii) beta draw and normalization, (iv) volatility and t-error
/// scales, (v) inline sparsification for retained draws.
inline DrawArchive run_mcmc(const ModelConfig& cfg, const Design& design) {
  cfg.validate();
  const auto clock_start = std::chrono::steady_clock::now();

  EffectiveDesign eff = remap_design(design, cfg.model_class);
  const Eigen::Index T = eff.T();
  const Eigen::Index M = eff.M();
  const Eigen::Index q = eff.q();
  const Eigen::Index J = eff.J();

  if ((cfg.model_class == ModelClass::ArLevels ||
       cfg.model_class == ModelClass::ArDifferences) &&
      M != 1)
    throw ValidationError("AR model classes require a single series (M=1); run "
                          "one model per series");
  const bool coint = q > 0;
  Eigen::Index rc = q;
  if (cfg.model_class == ModelClass::VecmFixedRank) {
    if (cfg.fixed_rank >= M)
      throw ValidationError("fixed rank must be below M=" + std::to_string(M));
    rc = cfg.fixed_rank;
  }
  const bool do_sparse = cfg.sparsify && cfg.model_class == ModelClass::Vecm;

  std::vector<int> order(M);
  for (Eigen::Index i = 0; i < M; ++i) order[i] = static_cast<int>(i);
  if (!cfg.equation_order.empty()) {
    if (cfg.equation_order.size() != static_cast<std::size_t>(M))
      throw ValidationError("equation_order length must equal M");
    std::vector<bool> seen(M, false);
    for (int v : cfg.equation_order) {
      if (v < 0 || v >= M || seen[v])
        throw ValidationError("equation_order must be a permutation of 0..M-1");
      seen[v] = true;
    }
    order = cfg.equation_order;
  }

  Rng rng(cfg.seed);

  const VectorXd w_colnorms_sq = eff.w.colwise().squaredNorm();
  const VectorXd x_colnorms_sq = eff.x.colwise().squaredNorm();
  MatrixXd wtw;
  if (coint) wtw = eff.w.transpose() * eff.w;

  const Eigen::Index Kbase = rc + J;
  MatrixXd beta;
  if (coint) {
    beta = MatrixXd::Zero(q, rc);
    for (Eigen::Index j = 0; j < rc; ++j) beta(j, j) = 1.0;
  }

  std::vector<EquationState> states;
  std::vector<VolState> vols;
  for (Eigen::Index i = 0; i < M; ++i) {
    states.emplace_back(T, Kbase + i);
    vols.emplace_back(T);
    vols.back().tau = VectorXd::Ones(T);
    if (cfg.error_dist == ErrorDist::StudentT) vols.back().nu = 10.0;
  }

  DrawArchive arc;
  arc.config = cfg;
  arc.T = T;
  arc.M = M;
  arc.q = q;
  arc.J = J;
  arc.rc = rc;
  arc.levels_target = eff.levels_target;
  const int n_retained = cfg.retained();
  arc.draws.reserve(n_retained);
  const int max_rank = static_cast<int>(std::min(M, q));
  if (coint) {
    arc.pi_mean.assign(T, MatrixXd::Zero(M, q));
    if (do_sparse) {
      arc.pip_pi.assign(T, MatrixXd::Zero(M, q));
      arc.pip_a.assign(T, MatrixXd::Zero(M, J));
      arc.ppr = MatrixXd::Zero(max_rank + 1, T);
    }
  }

  MatrixXd eps = MatrixXd::Zero(T, M);  // z-block residuals per equation
  MatrixXd eta = MatrixXd::Zero(T, M);  // full structural residuals
  MatrixXd zbase(T, Kbase);
  double phi_cached = -1.0;

  auto log_stage = [&](const std::string& s) {
    if (cfg.instrument) arc.stage_log.push_back(s);
  };

  for (int sweep = 0; sweep < cfg.draws; ++sweep) {
    try {
      // (i) rebuild z_t = (beta' w_t', x_t')'
      if (coint) zbase.leftCols(rc) = eff.w * beta;
      zbase.rightCols(J) = eff.x;
      // the beta this sweep's states condition on; archived with them so a
      // forecaster pairs coefficients with the matching cointegration space
      const MatrixXd beta_used = beta;
      log_stage("z-rebuild");

      // (ii) equations in order: steps 1-5 plus the serial residual pass
      for (Eigen::Index pos = 0; pos < M; ++pos) {
        const Eigen::Index i = order[pos];
        EquationState& st = states[pos];
        const Eigen::Index K = st.K();

        EquationData eq;
        eq.ylocal = eff.y.col(i);
        eq.h = vols[pos].logh.array().exp();
        eq.tau = vols[pos].tau;
        eq.Z.resize(T, K);
        eq.Z.leftCols(Kbase) = zbase;
        for (Eigen::Index j = 0; j < pos; ++j)
          eq.Z.col(Kbase + j) = -eps.col(j);

        const std::string label = "eq" + std::to_string(i);
        // step 1: joint draw of constants and scale roots
        if (cfg.prior_only) {
          VectorXd v = st.hs.prior_variance();
          VectorXd bhat(2 * K);
          for (Eigen::Index k = 0; k < 2 * K; ++k)
            bhat(k) = rng.normal() * std::sqrt(std::min(v(k), 1e12));
          st.set_stacked(bhat);
        } else {
          st.set_stacked(draw_constant_scales(eq, st.btilde, st.hs, rng, label));
        }
        if (!cfg.tvp) st.sqrt_theta.setZero();
        log_stage(label + ":constants");

        // steps 2-4: horseshoe hierarchy
        st.hs.update_local(st.stacked(), rng);
        st.hs.update_global(st.stacked(), rng);
        log_stage(label + ":shrinkage");

        // step 5: state paths
        if (cfg.tvp) {
          if (cfg.prior_only) {
            VectorXd walk = VectorXd::Zero(K);
            for (Eigen::Index t = 0; t < T; ++t) {
              for (Eigen::Index k = 0; k < K; ++k) walk(k) += rng.normal();
              st.btilde.row(t) = walk.transpose();
            }
          } else {
            st.btilde = ffbs_states(eq, st.b0, st.sqrt_theta, rng, label);
          }
          log_stage(label + ":states");
        }

        // residual pass feeding later equations and the volatility step
        for (Eigen::Index t = 0; t < T; ++t) {
          const VectorXd coeff = st.coeff_at(t);
          const double fit_full = coeff.dot(eq.Z.row(t).transpose());
          const double fit_z =
              coeff.head(Kbase).dot(eq.Z.row(t).head(Kbase).transpose());
          eta(t, pos) = eq.ylocal(t) - fit_full;
          eps(t, pos) = eq.ylocal(t) - fit_z;
        }
      }

      // per-t coefficient blocks shared by the beta draw and sparsification
      std::vector<MatrixXd> alpha_paths, a_paths;
      std::vector<SigmaFactor> sigma_paths;
      if (coint) {
        alpha_paths.assign(T, MatrixXd(M, rc));
        a_paths.assign(T, MatrixXd(M, J));
        sigma_paths.assign(T, SigmaFactor());
        for (Eigen::Index t = 0; t < T; ++t) {
          SigmaFactor& f = sigma_paths[t];
          f.l_inv = MatrixXd::Identity(M, M);
          f.h.resize(M);
          for (Eigen::Index pos = 0; pos < M; ++pos) {
            const VectorXd coeff = states[pos].coeff_at(t);
            alpha_paths[t].row(pos) = coeff.head(rc).transpose();
            a_paths[t].row(pos) = coeff.segment(rc, J).transpose();
            for (Eigen::Index j = 0; j < pos; ++j)
              f.l_inv(pos, j) = coeff(Kbase + j);
            f.h(pos) = std::exp(vols[pos].logh(t)) * vols[pos].tau(t);
          }
        }

        // (iii) step 6: beta draw + normalization
        if (cfg.prior_only) {
          for (Eigen::Index a = 0; a < q; ++a)
            for (Eigen::Index b = 0; b < rc; ++b)
              beta(a, b) = rng.normal() * std::sqrt(cfg.s0);
        } else {
          beta = draw_beta(eff.y, eff.x, eff.w, a_paths, alpha_paths, sigma_paths,
                           cfg.s0, rng);
          normalize(beta, alpha_paths, &arc.skipped_normalizations);
        }
        log_stage("beta");
      }

      // (iv) step 7: volatility per equation
      for (Eigen::Index pos = 0; pos < M; ++pos) {
        VolState& vol = vols[pos];
        if (cfg.prior_only) {
          vol.mu = rng.normal(0.0, std::sqrt(cfg.sv.mu_prior_var));
          vol.phi = 2.0 * rng.beta(cfg.sv.phi_beta_a, cfg.sv.phi_beta_b) - 1.0;
          vol.sigma = std::abs(rng.normal());
          vol.logh(0) = rng.normal(vol.mu,
                                   vol.sigma / std::sqrt(1.0 - vol.phi * vol.phi));
          for (Eigen::Index t = 1; t < T; ++t)
            vol.logh(t) = vol.mu + vol.phi * (vol.logh(t - 1) - vol.mu) +
                          vol.sigma * rng.normal();
          if (cfg.error_dist == ErrorDist::StudentT) {
            vol.nu = cfg.sv.nu_lower +
                     rng.uniform() * (cfg.sv.nu_upper - cfg.sv.nu_lower);
            for (Eigen::Index t = 0; t < T; ++t)
              vol.tau(t) = rng.inv_gamma(vol.nu / 2.0, vol.nu / 2.0);
          }
        } else if (cfg.error_dist == ErrorDist::StudentT) {
          const VectorXd scaled =
              eta.col(pos).cwiseQuotient(vol.tau.cwiseSqrt());
          draw_volatility(scaled, vol, rng, cfg.sv);
          vol.tau = draw_tau(eta.col(pos), vol.logh, vol.nu, rng);
          draw_nu(vol.tau, vol, rng, sweep < cfg.burnin, cfg.sv);
        } else {
          draw_volatility(eta.col(pos), vol, rng, cfg.sv);
        }
      }
      log_stage("volatility");

      // (v) retention + step 8
      const bool retained =
          sweep >= cfg.burnin && (sweep - cfg.burnin + 1) % cfg.thin == 0;
      if (!retained) continue;

      if (!cfg.prior_only) {
        // residual consistency: eta must equal L^{-1} eps rebuilt from the
        // stored Cholesky coefficients
        for (Eigen::Index t = 0; t < T; ++t) {
          for (Eigen::Index pos = 0; pos < M; ++pos) {
            double rebuilt = eps(t, pos);
            const VectorXd coeff = states[pos].coeff_at(t);
            // Z carries -eps columns, so the full fit subtracts coeff * eps
            for (Eigen::Index j = 0; j < pos; ++j)
              rebuilt += coeff(Kbase + j) * eps(t, j);
            arc.max_residual_gap =
                std::max(arc.max_residual_gap, std::abs(rebuilt - eta(t, pos)));
          }
        }
      }

      Draw draw;
      draw.logh.resize(T, M);
      for (Eigen::Index pos = 0; pos < M; ++pos) {
        const VolState& vol = vols[pos];
        draw.logh.col(pos) = vol.logh;
        EquationTerminal term;
        term.b0 = states[pos].b0;
        term.sqrt_theta = states[pos].sqrt_theta;
        term.btilde_last = states[pos].btilde.row(T - 1).transpose();
        term.logh_last = vol.logh(T - 1);
        term.mu = vol.mu;
        term.phi = vol.phi;
        term.sigma = vol.sigma;
        term.nu = vol.nu;
        draw.eq.push_back(std::move(term));
      }
      detail::check_finite(draw.logh, "log-volatility", sweep);

      std::vector<MatrixXd> pi;
      if (coint) {
        draw.beta = beta_used;
        detail::check_finite(draw.beta, "beta", sweep);
        pi = assemble_pi(alpha_paths, beta);
        for (Eigen::Index t = 0; t < T; ++t) {
          detail::check_finite(pi[t], "pi", sweep);
          detail::check_finite(a_paths[t], "a", sweep);
          // archive the volatility state drawn this sweep
          sigma_paths[t].h =
              draw.logh.row(t).transpose().array().exp().matrix();
        }
      }

      if (do_sparse) {
        double phi_rank;
        if (cfg.phi_per_draw || phi_cached < 0.0) {
          phi_rank = noise_threshold(eps);
          phi_cached = phi_rank;
        } else {
          phi_rank = phi_cached;
        }
        SparseDraw sp;
        sp.phi = phi_rank;
        sp.rank.resize(T);
        for (Eigen::Index t = 0; t < T; ++t) {
          MatrixXd pi_star = savs_group_pi(pi[t], w_colnorms_sq);
          sp.rank[t] = estimate_rank(pi_star, wtw, phi_rank);
          MatrixXd a_star(M, J);
          for (Eigen::Index pos = 0; pos < M; ++pos)
            a_star.row(pos) =
                savs_lasso_a(a_paths[t].row(pos).transpose(), x_colnorms_sq)
                    .transpose();
          GlassoResult gl = glasso_one_pass(sigma_paths[t].sigma(), cfg.glasso);
          arc.floored_eigenvalues += gl.floored_eigenvalues;

          arc.pi_mean[t] += pi_star;
          arc.pip_pi[t] += (pi_star.array() != 0.0).cast<double>().matrix();
          arc.pip_a[t] += (a_star.array() != 0.0).cast<double>().matrix();
          arc.ppr(std::min(sp.rank[t], max_rank), t) += 1.0;
          if (cfg.store_paths) {
            sp.pi_star.push_back(std::move(pi_star));
            sp.a_star.push_back(std::move(a_star));
            sp.prec_star.push_back(std::move(gl.precision));
          }
        }
        arc.rank_paths.push_back(sp.rank);
        draw.sparse = std::move(sp);
        log_stage("sparsify");
      } else if (coint) {
        for (Eigen::Index t = 0; t < T; ++t) arc.pi_mean[t] += pi[t];
      }

      if (cfg.store_paths && coint) {
        draw.pi = std::move(pi);
        draw.a = std::move(a_paths);
        draw.sigma_t = std::move(sigma_paths);
      }
      arc.draws.push_back(std::move(draw));
    } catch (const NumericalError& e) {
      throw NumericalError("sweep " + std::to_string(sweep) + ": " + e.what());
    }
  }

  const double n_kept = std::max<double>(1.0, static_cast<double>(arc.draws.size()));
  for (auto& m : arc.pi_mean) m /= n_kept;
  for (auto& m : arc.pip_pi) m /= n_kept;
  for (auto& m : arc.pip_a) m /= n_kept;
  if (arc.ppr.size() > 0) arc.ppr /= n_kept;

  for (const auto& st : states) arc.clamp_events += st.hs.clamp_count;
  for (const auto& v : vols) arc.phi_rejects += v.phi_reject_count;
  arc.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start)
          .count();
  return arc;
}

}  // namespace tvecm
