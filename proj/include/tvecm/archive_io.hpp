#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvecm/errors.hpp"
#include "tvecm/sampler.hpp"

namespace tvecm {

inline constexpr const char* kLibraryVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64-bit, used for manifests and reproducibility checks)
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["model_class"] = to_string(cfg.model_class);
  j["fixed_rank"] = cfg.fixed_rank;
  j["tvp"] = cfg.tvp;
  j["error_dist"] = to_string(cfg.error_dist);
  j["p"] = cfg.P;
  j["draws"] = cfg.draws;
  j["burnin"] = cfg.burnin;
  j["thin"] = cfg.thin;
  j["seed"] = cfg.seed;
  j["s0"] = cfg.s0;
  j["sparsify"] = cfg.sparsify;
  j["phi_per_draw"] = cfg.phi_per_draw;
  j["interweave"] = cfg.sv.interweave;
  if (!cfg.equation_order.empty()) j["equation_order"] = cfg.equation_order;
  return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  std::vector<std::string> bad;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      bad.push_back(std::string("field '") + key + "' has the wrong type");
    }
  };
  std::string mc = to_string(cfg.model_class), ed = to_string(cfg.error_dist);
  get("model_class", mc);
  get("error_dist", ed);
  get("fixed_rank", cfg.fixed_rank);
  get("tvp", cfg.tvp);
  get("p", cfg.P);
  get("draws", cfg.draws);
  get("burnin", cfg.burnin);
  get("thin", cfg.thin);
  get("seed", cfg.seed);
  get("s0", cfg.s0);
  get("sparsify", cfg.sparsify);
  get("phi_per_draw", cfg.phi_per_draw);
  get("interweave", cfg.sv.interweave);
  get("equation_order", cfg.equation_order);
  try {
    cfg.model_class = model_class_from_string(mc);
  } catch (const ValidationError& e) {
    bad.push_back(e.what());
  }
  try {
    cfg.error_dist = error_dist_from_string(ed);
  } catch (const ValidationError& e) {
    bad.push_back(e.what());
  }
  if (!bad.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw ValidationError(msg);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Binary blocks: little-endian, per matrix a dims header (two int64) followed
// by row-major doubles
// ---------------------------------------------------------------------------

namespace detail {

inline void write_matrix(std::ofstream& out, const MatrixXd& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  out.write(reinterpret_cast<const char*>(&r), sizeof(r));
  out.write(reinterpret_cast<const char*>(&c), sizeof(c));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

inline MatrixXd read_matrix(std::ifstream& in) {
  std::int64_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), sizeof(r));
  in.read(reinterpret_cast<char*>(&c), sizeof(c));
  if (!in || r < 0 || c < 0) throw DataError("corrupt archive block header");
  MatrixXd m(r, c);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(i, j) = v;
    }
  if (!in) throw DataError("corrupt archive block payload");
  return m;
}

inline void write_scalar(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline double read_scalar(std::ifstream& in) {
  double v = 0.0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

inline std::string quantile_row(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    const double idx = p * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
  };
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", mean, at(0.05), at(0.95));
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Archive directory layout: metadata.json, draws.bin, summary CSVs
// ---------------------------------------------------------------------------

inline std::vector<std::string> save_archive(const DrawArchive& arc,
                                             const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  const auto S = arc.draws.size();

  {
    nlohmann::json meta;
    meta["version"] = kLibraryVersion;
    meta["config"] = config_to_json(arc.config);
    meta["dims"] = {{"T", arc.T}, {"M", arc.M}, {"q", arc.q},
                    {"J", arc.J},  {"rc", arc.rc}};
    meta["levels_target"] = arc.levels_target;
    meta["retained"] = S;
    meta["diagnostics"] = {
        {"clamp_events", arc.clamp_events},
        {"phi_rejects", arc.phi_rejects},
        {"skipped_normalizations", arc.skipped_normalizations},
        {"floored_eigenvalues", arc.floored_eigenvalues},
        {"max_residual_gap", arc.max_residual_gap},
        {"runtime_seconds", arc.runtime_seconds},
    };
    const std::string path = dir + "/metadata.json";
    std::ofstream out(path);
    out << meta.dump(2) << "\n";
    written.push_back(path);
  }

  {
    const std::string path = dir + "/draws.bin";
    std::ofstream out(path, std::ios::binary);
    const char magic[8] = {'T', 'V', 'E', 'C', 'M', 'A', '1', '\0'};
    out.write(magic, sizeof(magic));
    const std::int64_t n = static_cast<std::int64_t>(S);
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    const std::int64_t m = arc.M;
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    for (const Draw& d : arc.draws) {
      detail::write_matrix(out, d.beta.size() > 0 ? d.beta : MatrixXd(0, 0));
      for (const EquationTerminal& eq : d.eq) {
        detail::write_matrix(out, eq.b0);
        detail::write_matrix(out, eq.sqrt_theta);
        detail::write_matrix(out, eq.btilde_last);
        detail::write_scalar(out, eq.logh_last);
        detail::write_scalar(out, eq.mu);
        detail::write_scalar(out, eq.phi);
        detail::write_scalar(out, eq.sigma);
        detail::write_scalar(out, eq.nu);
      }
      detail::write_matrix(out, d.logh);
    }
    written.push_back(path);
  }

  auto open_csv = [&](const std::string& name) {
    const std::string path = dir + "/" + name;
    written.push_back(path);
    return std::ofstream(path);
  };

  if (!arc.pi_mean.empty()) {
    auto out = open_csv("pi_mean.csv");
    out << "time,row,col,value\n";
    for (std::size_t t = 0; t < arc.pi_mean.size(); ++t)
      for (Eigen::Index i = 0; i < arc.pi_mean[t].rows(); ++i)
        for (Eigen::Index j = 0; j < arc.pi_mean[t].cols(); ++j)
          out << t << ',' << i << ',' << j << ',' << arc.pi_mean[t](i, j) << '\n';
  }
  if (arc.ppr.size() > 0) {
    auto out = open_csv("ppr.csv");
    out << "time";
    for (Eigen::Index r = 0; r < arc.ppr.rows(); ++r) out << ",rank" << r;
    out << '\n';
    for (Eigen::Index t = 0; t < arc.ppr.cols(); ++t) {
      out << t;
      for (Eigen::Index r = 0; r < arc.ppr.rows(); ++r)
        out << ',' << arc.ppr(r, t);
      out << '\n';
    }
  }
  if (!arc.pip_pi.empty()) {
    auto out = open_csv("pip_pi.csv");
    out << "time,row,col,value\n";
    for (std::size_t t = 0; t < arc.pip_pi.size(); ++t)
      for (Eigen::Index i = 0; i < arc.pip_pi[t].rows(); ++i)
        for (Eigen::Index j = 0; j < arc.pip_pi[t].cols(); ++j)
          out << t << ',' << i << ',' << j << ',' << arc.pip_pi[t](i, j) << '\n';
  }
  if (!arc.pip_a.empty()) {
    auto out = open_csv("pip_a.csv");
    out << "time,row,col,value\n";
    for (std::size_t t = 0; t < arc.pip_a.size(); ++t)
      for (Eigen::Index i = 0; i < arc.pip_a[t].rows(); ++i)
        for (Eigen::Index j = 0; j < arc.pip_a[t].cols(); ++j)
          out << t << ',' << i << ',' << j << ',' << arc.pip_a[t](i, j) << '\n';
  }
  if (S > 0) {
    auto out = open_csv("volatility.csv");
    out << "time,equation,mean_logh,q05_logh,q95_logh\n";
    std::vector<double> draws_at(S);
    for (Eigen::Index t = 0; t < arc.T; ++t)
      for (Eigen::Index i = 0; i < arc.M; ++i) {
        for (std::size_t s = 0; s < S; ++s) draws_at[s] = arc.draws[s].logh(t, i);
        out << t << ',' << i << ',' << detail::quantile_row(draws_at) << '\n';
      }
  }
  if (S > 0) {
    auto out = open_csv("sv_params.csv");
    out << "equation,parameter,mean,q05,q95\n";
    std::vector<double> v(S);
    for (Eigen::Index i = 0; i < arc.M; ++i) {
      auto emit = [&](const char* name, auto getter) {
        for (std::size_t s = 0; s < S; ++s) v[s] = getter(arc.draws[s].eq[i]);
        out << i << ',' << name << ',' << detail::quantile_row(v) << '\n';
      };
      emit("mu", [](const EquationTerminal& e) { return e.mu; });
      emit("phi", [](const EquationTerminal& e) { return e.phi; });
      emit("sigma", [](const EquationTerminal& e) { return e.sigma; });
      if (arc.config.error_dist == ErrorDist::StudentT)
        emit("nu", [](const EquationTerminal& e) { return e.nu; });
    }
  }
  return written;
}

/// Rebuild the forecasting-relevant part of an archive from disk. Summary
/// statistics are not reloaded; they live in the CSVs.
inline DrawArchive load_archive(const std::string& dir) {
  DrawArchive arc;
  {
    std::ifstream in(dir + "/metadata.json");
    if (!in) throw DataError("cannot open archive metadata in " + dir);
    nlohmann::json meta = nlohmann::json::parse(in);
    arc.config = config_from_json(meta.at("config"));
    arc.T = meta.at("dims").at("T").get<Eigen::Index>();
    arc.M = meta.at("dims").at("M").get<Eigen::Index>();
    arc.q = meta.at("dims").at("q").get<Eigen::Index>();
    arc.J = meta.at("dims").at("J").get<Eigen::Index>();
    arc.rc = meta.at("dims").at("rc").get<Eigen::Index>();
    arc.levels_target = meta.at("levels_target").get<bool>();
  }
  std::ifstream in(dir + "/draws.bin", std::ios::binary);
  if (!in) throw DataError("cannot open archive draws in " + dir);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::string(magic, 7) != "TVECMA1")
    throw DataError("bad archive magic in " + dir);
  std::int64_t n = 0, m = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  for (std::int64_t s = 0; s < n; ++s) {
    Draw d;
    d.beta = detail::read_matrix(in);
    for (std::int64_t i = 0; i < m; ++i) {
      EquationTerminal eq;
      eq.b0 = detail::read_matrix(in);
      eq.sqrt_theta = detail::read_matrix(in);
      eq.btilde_last = detail::read_matrix(in);
      eq.logh_last = detail::read_scalar(in);
      eq.mu = detail::read_scalar(in);
      eq.phi = detail::read_scalar(in);
      eq.sigma = detail::read_scalar(in);
      eq.nu = detail::read_scalar(in);
      d.eq.push_back(std::move(eq));
    }
    d.logh = detail::read_matrix(in);
    arc.draws.push_back(std::move(d));
  }
  return arc;
}

}  // namespace tvecm
