#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tvecm/errors.hpp"
#include "tvecm/rng.hpp"
#include "tvecm/sampler.hpp"

namespace tvecm {

// ---------------------------------------------------------------------------
// Predictive simulation
// ---------------------------------------------------------------------------

/// One-step-ahead predictive draws in levels, S x M. Per retained draw the
/// states advance one random-walk step, log h advances by its AR(1), and the
/// observation equations are simulated in their recursive (Cholesky) order.
inline MatrixXd predict_one_step(const DrawArchive& arc, const VectorXd& w_next,
                                 const VectorXd& x_next, const VectorXd& y_last,
                                 Rng& rng) {
  const Eigen::Index M = arc.M;
  const Eigen::Index rc = arc.rc;
  const Eigen::Index J = arc.J;
  const Eigen::Index Kbase = rc + J;
  if (w_next.size() != arc.q)
    throw ContractError("predict_one_step: w_next length mismatch");
  if (x_next.size() != J)
    throw ContractError("predict_one_step: x_next length mismatch");
  if (!arc.levels_target && y_last.size() != M)
    throw ContractError("predict_one_step: y_last length mismatch");
  if (arc.draws.empty()) throw ContractError("predict_one_step: empty archive");

  const bool student_t = arc.config.error_dist == ErrorDist::StudentT;
  MatrixXd out(static_cast<Eigen::Index>(arc.draws.size()), M);
  VectorXd z_next(Kbase);
  VectorXd eps_sim(M);

  for (std::size_t s = 0; s < arc.draws.size(); ++s) {
    const Draw& d = arc.draws[s];
    if (rc > 0) z_next.head(rc) = d.beta.transpose() * w_next;
    z_next.tail(J) = x_next;

    for (Eigen::Index i = 0; i < M; ++i) {
      const EquationTerminal& eq = d.eq[i];
      const Eigen::Index K = eq.b0.size();
      VectorXd btilde = eq.btilde_last;
      if (arc.config.tvp)
        for (Eigen::Index k = 0; k < K; ++k) btilde(k) += rng.normal();
      const VectorXd coeff = eq.b0 + eq.sqrt_theta.cwiseProduct(btilde);

      const double logh =
          eq.mu + eq.phi * (eq.logh_last - eq.mu) + eq.sigma * rng.normal();
      const double tau =
          student_t && eq.nu > 2.0 ? rng.inv_gamma(eq.nu / 2.0, eq.nu / 2.0) : 1.0;

      double mean = coeff.head(Kbase).dot(z_next);
      for (Eigen::Index j = 0; j < i; ++j) mean -= coeff(Kbase + j) * eps_sim(j);
      const double eta = std::sqrt(std::exp(logh) * tau) * rng.normal();
      const double dy = mean + eta;
      // structural residual feeding later equations: dy minus the z-block fit
      eps_sim(i) = dy - coeff.head(Kbase).dot(z_next);
      out(static_cast<Eigen::Index>(s), i) =
          arc.levels_target ? dy : y_last(i) + dy;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct RmseResult {
  VectorXd per_series;
  double total = 0.0;
};

inline RmseResult rmse(const MatrixXd& point_forecasts, const MatrixXd& actuals) {
  if (point_forecasts.rows() != actuals.rows() ||
      point_forecasts.cols() != actuals.cols())
    throw ContractError("rmse: shape mismatch");
  const MatrixXd err = point_forecasts - actuals;
  RmseResult r;
  r.per_series = err.array().square().colwise().mean().sqrt().matrix().transpose();
  r.total = std::sqrt(err.array().square().mean());
  return r;
}

/// Sample CRPS of an ensemble against a scalar outcome, via the sorted
/// O(S log S) form of the standard estimator
/// (1/S) sum_s |x_s - y| - (1/(2 S^2)) sum_s sum_r |x_s - x_r|.
inline double crps_sample(VectorXd ensemble, double y) {
  const Eigen::Index S = ensemble.size();
  if (S < 2) throw ContractError("crps_sample: need at least 2 draws");
  std::sort(ensemble.data(), ensemble.data() + S);
  double abs_term = 0.0, pair_term = 0.0;
  for (Eigen::Index i = 0; i < S; ++i) {
    abs_term += std::abs(ensemble(i) - y);
    pair_term += (2.0 * i - S + 1.0) * ensemble(i);
  }
  return abs_term / S - pair_term / (static_cast<double>(S) * S);
}

/// Median of each column of an ensemble matrix (rows = draws).
inline VectorXd ensemble_median(const MatrixXd& ensemble) {
  VectorXd med(ensemble.cols());
  std::vector<double> col(ensemble.rows());
  for (Eigen::Index j = 0; j < ensemble.cols(); ++j) {
    for (Eigen::Index s = 0; s < ensemble.rows(); ++s) col[s] = ensemble(s, j);
    const std::size_t h = col.size() / 2;
    std::nth_element(col.begin(), col.begin() + h, col.end());
    double m = col[h];
    if (col.size() % 2 == 0) {
      std::nth_element(col.begin(), col.begin() + h - 1, col.begin() + h);
      m = 0.5 * (m + col[h - 1]);
    }
    med(j) = m;
  }
  return med;
}

// ---------------------------------------------------------------------------
// Model confidence set
// ---------------------------------------------------------------------------

struct McsOptions {
  int block_length = 0;  // 0 = ceil(H^(1/3))
  int replications = 5000;
  std::uint64_t seed = 7;
};

struct McsResult {
  std::vector<std::string> labels;
  VectorXd p_values;                // MCS p-value per model
  std::vector<int> elimination_order;  // model indices, worst first
  std::vector<bool> in_set;         // at the alpha passed to mcs()
  std::vector<int> ties;            // models whose elimination broke a tie
};

/// Sequential max-t elimination with a moving-block bootstrap. The full
/// elimination sequence and MCS p-values are computed once; the surviving set
/// at significance alpha is every model with p-value >= alpha, which makes the
/// set monotone in alpha by construction.
inline McsResult mcs(const MatrixXd& losses, const std::vector<std::string>& labels,
                     double alpha, const McsOptions& opt = {}) {
  const Eigen::Index H = losses.rows();
  const Eigen::Index K = losses.cols();
  if (H < 20) throw ContractError("mcs: need at least 20 evaluation points");
  if (K < 1 || labels.size() != static_cast<std::size_t>(K))
    throw ContractError("mcs: label/column mismatch");

  McsResult res;
  res.labels = labels;
  res.p_values = VectorXd::Ones(K);
  res.in_set.assign(K, true);
  if (K == 1) return res;

  const int L = opt.block_length > 0
                    ? opt.block_length
                    : static_cast<int>(std::ceil(std::cbrt(static_cast<double>(H))));
  const int B = opt.replications;
  Rng rng(opt.seed);

  // bootstrap column means, shared across elimination steps
  MatrixXd boot_means(B, K);
  std::vector<Eigen::Index> idx(H);
  for (int b = 0; b < B; ++b) {
    Eigen::Index filled = 0;
    while (filled < H) {
      const Eigen::Index start =
          static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(H)) % H;
      for (int l = 0; l < L && filled < H; ++l)
        idx[filled++] = (start + l) % H;
    }
    VectorXd acc = VectorXd::Zero(K);
    for (Eigen::Index h = 0; h < H; ++h) acc += losses.row(idx[h]).transpose();
    boot_means.row(b) = acc.transpose() / static_cast<double>(H);
  }
  const VectorXd mean_loss = losses.colwise().mean().transpose();

  std::vector<int> remaining(K);
  std::iota(remaining.begin(), remaining.end(), 0);
  double p_running = 0.0;

  while (remaining.size() > 1) {
    const auto R = remaining.size();
    double avg = 0.0;
    VectorXd boot_avg = VectorXd::Zero(B);
    for (int i : remaining) avg += mean_loss(i);
    avg /= static_cast<double>(R);
    for (int b = 0; b < B; ++b) {
      double a = 0.0;
      for (int i : remaining) a += boot_means(b, i);
      boot_avg(b) = a / static_cast<double>(R);
    }

    // studentized relative-to-average differentials
    std::vector<double> tstat(R), se(R), d(R);
    for (std::size_t r = 0; r < R; ++r) {
      const int i = remaining[r];
      d[r] = mean_loss(i) - avg;
      double var = 0.0;
      for (int b = 0; b < B; ++b) {
        const double dev = (boot_means(b, i) - boot_avg(b)) - d[r];
        var += dev * dev;
      }
      var /= static_cast<double>(B);
      se[r] = std::sqrt(std::max(var, 0.0)) + 1e-12;
      tstat[r] = d[r] / se[r];
    }
    const double t_max = *std::max_element(tstat.begin(), tstat.end());

    int exceed = 0;
    for (int b = 0; b < B; ++b) {
      double t_star = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < R; ++r) {
        const int i = remaining[r];
        const double t = ((boot_means(b, i) - boot_avg(b)) - d[r]) / se[r];
        t_star = std::max(t_star, t);
      }
      if (t_star >= t_max) ++exceed;
    }
    const double p_step = static_cast<double>(exceed + 1) / (B + 1);
    p_running = std::max(p_running, p_step);

    // worst model: highest t, ties broken by mean loss then label order
    std::size_t worst = 0;
    bool tied = false;
    for (std::size_t r = 1; r < R; ++r) {
      if (tstat[r] > tstat[worst] + 1e-12) {
        worst = r;
        tied = false;
      } else if (std::abs(tstat[r] - tstat[worst]) <= 1e-12) {
        tied = true;
        if (mean_loss(remaining[r]) > mean_loss(remaining[worst]) + 1e-15 ||
            (std::abs(mean_loss(remaining[r]) - mean_loss(remaining[worst])) <=
                 1e-15 &&
             labels[remaining[r]] < labels[remaining[worst]]))
          worst = r;
      }
    }
    const int eliminated = remaining[static_cast<std::ptrdiff_t>(worst)];
    res.p_values(eliminated) = p_running;
    res.elimination_order.push_back(eliminated);
    if (tied) res.ties.push_back(eliminated);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  res.p_values(remaining.front()) = 1.0;
  res.elimination_order.push_back(remaining.front());
  for (Eigen::Index i = 0; i < K; ++i) res.in_set[i] = res.p_values(i) >= alpha;
  return res;
}

// ---------------------------------------------------------------------------
// Volatility principal component
// ---------------------------------------------------------------------------

struct VolPcaResult {
  VectorXd scores;     // T
  VectorXd loadings;   // M
  double explained = 0.0;
};

/// First principal component of posterior log-volatility paths, signed so the
/// scores correlate positively with the cross-sectional mean.
inline VolPcaResult vol_pca(const MatrixXd& vol_paths) {
  const Eigen::Index T = vol_paths.rows();
  const Eigen::Index M = vol_paths.cols();
  if (M < 2) throw ContractError("vol_pca: need at least 2 series");
  MatrixXd centered = vol_paths.rowwise() - vol_paths.colwise().mean();
  const MatrixXd cov = centered.transpose() * centered / static_cast<double>(T - 1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
  VolPcaResult r;
  r.loadings = es.eigenvectors().col(M - 1);
  const double total = es.eigenvalues().sum();
  r.explained = total > 0.0 ? es.eigenvalues()(M - 1) / total : 0.0;
  r.scores = centered * r.loadings;
  const VectorXd xsec_mean = centered.rowwise().mean();
  if (r.scores.dot(xsec_mean) < 0.0) {
    r.scores = -r.scores;
    r.loadings = -r.loadings;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rolling backtest
// ---------------------------------------------------------------------------

struct BacktestOptions {
  int window = 400;   // estimation window in raw rows
  int origins = 100;  // number of one-step forecast origins
  int stride = 1;     // re-estimate every stride origins, reuse in between
  bool point_mean = false;  // default point functional is the ensemble median
  std::uint64_t seed = 1;
};

struct ModelBacktest {
  MatrixXd point;    // H x M point forecasts in levels
  MatrixXd actual;   // H x M
  MatrixXd crps;     // H x M sample CRPS
  VectorXd loss_sq;    // H, per-origin squared error averaged over series
  VectorXd loss_crps;  // H, per-origin CRPS averaged over series
  RmseResult rmse_levels;
  double crps_total = 0.0;
  int stride_used = 1;
};

namespace detail {

inline Panel slice_panel(const Panel& p, Eigen::Index first, Eigen::Index count,
                         const std::vector<Eigen::Index>& series) {
  Panel out;
  out.timestamps.assign(p.timestamps.begin() + first,
                        p.timestamps.begin() + first + count);
  out.levels.resize(count, static_cast<Eigen::Index>(series.size()));
  for (std::size_t j = 0; j < series.size(); ++j) {
    out.levels.col(static_cast<Eigen::Index>(j)) =
        p.levels.col(series[j]).segment(first, count);
    out.names.push_back(p.names[static_cast<std::size_t>(series[j])]);
  }
  out.factors = p.factors.middleRows(first, count);
  out.scales = VectorXd::Ones(out.m());
  return out;
}

/// Regressors at the forecast time, one step past the window's last raw row.
inline void forecast_regressors(const Panel& p, Eigen::Index target,
                                const ModelConfig& cfg, const Deterministics& det,
                                Eigen::Index design_T, std::int64_t ts_next,
                                VectorXd& w_next, VectorXd& x_next,
                                VectorXd& y_last) {
  const Eigen::Index M = p.m();
  const Eigen::Index q_f = p.q_f();
  const int P = cfg.P;
  const Eigen::Index N = det.n_columns();
  const bool levels = cfg.model_class == ModelClass::VarLevels ||
                      cfg.model_class == ModelClass::ArLevels;
  const bool coint = cfg.model_class == ModelClass::Vecm ||
                     cfg.model_class == ModelClass::VecmFixedRank;

  y_last = p.levels.row(target - 1).transpose();
  if (coint) {
    w_next.resize(M + q_f);
    w_next.head(M) = y_last;
    if (q_f > 0) w_next.tail(q_f) = p.factors.row(target - 1).transpose();
  } else {
    w_next.resize(0);
  }
  if (levels) {
    x_next.resize(M * P + q_f + N);
    for (int lag = 1; lag <= P; ++lag)
      x_next.segment((lag - 1) * M, M) = p.levels.row(target - lag).transpose();
    if (q_f > 0)
      x_next.segment(M * P, q_f) = p.factors.row(target - 1).transpose();
    if (N > 0)
      x_next.tail(N) = deterministic_row(det, ts_next, design_T, design_T);
  } else {
    x_next.resize(M * P + N);
    for (int lag = 1; lag <= P; ++lag)
      x_next.segment((lag - 1) * M, M) =
          (p.levels.row(target - lag) - p.levels.row(target - lag - 1)).transpose();
    if (N > 0)
      x_next.tail(N) = deterministic_row(det, ts_next, design_T, design_T);
  }
}

}  // namespace detail

/// Rolling one-step backtest of a single model configuration. AR classes run
/// one independent chain per series and stack the results.
inline ModelBacktest backtest_model(const Panel& panel, ModelConfig cfg,
                                    const Deterministics& det,
                                    const BacktestOptions& opt) {
  const Eigen::Index t_raw = panel.t_raw();
  const Eigen::Index M = panel.m();
  const Eigen::Index H = opt.origins;
  if (t_raw < opt.window + H)
    throw ContractError("backtest: panel too short for window + origins");
  const bool per_series = cfg.model_class == ModelClass::ArLevels ||
                          cfg.model_class == ModelClass::ArDifferences;

  std::vector<std::vector<Eigen::Index>> groups;
  if (per_series) {
    for (Eigen::Index j = 0; j < M; ++j) groups.push_back({j});
  } else {
    std::vector<Eigen::Index> all(M);
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    groups.push_back(all);
  }

  ModelBacktest bt;
  bt.point.resize(H, M);
  bt.actual.resize(H, M);
  bt.crps.resize(H, M);
  bt.stride_used = opt.stride;
  Rng fc_rng(opt.seed ^ 0x5eedULL);

  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& series = groups[g];
    DrawArchive arc;
    Eigen::Index design_T = 0;
    for (Eigen::Index k = 0; k < H; ++k) {
      const Eigen::Index target = t_raw - H + k;  // raw row being forecast
      if (k % opt.stride == 0) {
        Panel win =
            detail::slice_panel(panel, target - opt.window, opt.window, series);
        Design d = build_design(win, cfg.P, det);
        design_T = d.T();
        ModelConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + 1000003ULL * static_cast<std::uint64_t>(k) +
                       31ULL * static_cast<std::uint64_t>(g);
        arc = run_mcmc(run_cfg, d);
      }
      Panel group_view = detail::slice_panel(panel, 0, t_raw, series);
      VectorXd w_next, x_next, y_last;
      detail::forecast_regressors(group_view, target, cfg, det, design_T,
                                  panel.timestamps[target], w_next, x_next,
                                  y_last);
      MatrixXd ens = predict_one_step(arc, w_next, x_next, y_last, fc_rng);
      const VectorXd pt = opt.point_mean
                              ? ens.colwise().mean().transpose().eval()
                              : ensemble_median(ens);
      for (std::size_t j = 0; j < series.size(); ++j) {
        const Eigen::Index col = series[j];
        const double scale = panel.scales(col);
        bt.point(k, col) = pt(static_cast<Eigen::Index>(j)) * scale;
        bt.actual(k, col) = panel.levels(target, col) * scale;
        bt.crps(k, col) =
            crps_sample(ens.col(static_cast<Eigen::Index>(j)) * scale,
                        bt.actual(k, col));
      }
    }
  }

  bt.loss_sq = (bt.point - bt.actual).array().square().rowwise().mean();
  bt.loss_crps = bt.crps.rowwise().mean();
  bt.rmse_levels = rmse(bt.point, bt.actual);
  bt.crps_total = bt.crps.mean();
  return bt;
}

}  // namespace tvecm
