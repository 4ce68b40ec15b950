#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "tvecm/archive_io.hpp"
#include "tvecm/config.hpp"
#include "tvecm/evaluate.hpp"
#include "tvecm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitPartial = 4;

std::string default_output_root() {
  const char* env = std::getenv("TVECM_OUTPUT_ROOT");
  return env && *env ? env : ".";
}

std::int64_t now_epoch_s() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Manifest {
  json doc;
  std::string out_dir;

  explicit Manifest(const std::string& dir) : out_dir(dir) {
    doc["version"] = tvecm::kLibraryVersion;
    doc["started"] = tvecm::format_timestamp(now_epoch_s());
    doc["outputs"] = json::object();
  }

  void input(const std::string& role, const std::string& path) {
    doc[role + "_path"] = path;
    doc[role + "_hash"] = tvecm::hash_file(path);
  }

  void output(const std::string& path) {
    doc["outputs"][fs::path(path).filename().string()] = tvecm::hash_file(path);
  }

  void write() {
    doc["finished"] = tvecm::format_timestamp(now_epoch_s());
    std::ofstream out(out_dir + "/manifest.json");
    out << doc.dump(2) << "\n";
  }
};

/// Removes outputs written so far when a run fails part-way.
struct OutputGuard {
  std::string dir;
  bool existed_before;
  bool armed = true;

  explicit OutputGuard(const std::string& d)
      : dir(d), existed_before(fs::exists(d)) {
    fs::create_directories(d);
  }
  void disarm() { armed = false; }
  ~OutputGuard() {
    if (!armed) return;
    if (!existed_before) {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  }
};

void write_loss_csv(const std::string& path,
                    const std::vector<std::string>& labels,
                    const Eigen::MatrixXd& losses) {
  std::ofstream out(path);
  out << "origin";
  for (const auto& l : labels) out << ',' << tvecm::csv_quote(l);
  out << '\n';
  for (Eigen::Index h = 0; h < losses.rows(); ++h) {
    out << h;
    for (Eigen::Index k = 0; k < losses.cols(); ++k) out << ',' << losses(h, k);
    out << '\n';
  }
}

void write_mcs_csv(const std::string& path, const tvecm::McsResult& res) {
  std::ofstream out(path);
  out << "model,rank,p_value,in_set\n";
  // rank 1 = last eliminated (best)
  const auto n = res.elimination_order.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    const int i = res.elimination_order[n - 1 - pos];
    out << tvecm::csv_quote(res.labels[i]) << ',' << (pos + 1) << ','
        << res.p_values(i) << ',' << (res.in_set[i] ? 1 : 0) << '\n';
  }
}

int cmd_estimate(const std::string& config_path, const std::string& data_path,
                 const std::string& out_dir, const json& overrides) {
  tvecm::RunConfig rc = tvecm::load_run_config(config_path);
  if (overrides.contains("seed")) rc.model.seed = overrides["seed"].get<std::uint64_t>();
  if (overrides.contains("draws")) rc.model.draws = overrides["draws"].get<int>();
  rc.model.validate();

  OutputGuard guard(out_dir);
  Manifest manifest(out_dir);
  manifest.input("config", config_path);
  manifest.input("data", data_path);
  manifest.doc["seed"] = rc.model.seed;

  tvecm::Panel panel =
      tvecm::load_panel(data_path, rc.data.schema, rc.data.policy, rc.data.standardize);
  tvecm::Design design = tvecm::build_design(panel, rc.model.P, rc.deterministics);
  tvecm::DrawArchive arc = tvecm::run_mcmc(rc.model, design);
  for (const auto& f : tvecm::save_archive(arc, out_dir)) manifest.output(f);
  manifest.write();
  guard.disarm();
  std::cout << "archive written to " << out_dir << " (" << arc.draws.size()
            << " retained draws, " << arc.runtime_seconds << "s)\n";
  return kExitOk;
}

int cmd_backtest(const std::string& config_path, const std::string& data_path,
                 const std::string& out_dir) {
  tvecm::RunConfig rc = tvecm::load_run_config(config_path);
  if (rc.grid.empty())
    throw tvecm::ValidationError("backtest requires a non-empty model grid");
  for (const auto& g : rc.grid) g.model.validate();

  OutputGuard guard(out_dir);
  Manifest manifest(out_dir);
  manifest.input("config", config_path);
  manifest.input("data", data_path);

  tvecm::Panel panel =
      tvecm::load_panel(data_path, rc.data.schema, rc.data.policy, rc.data.standardize);
  tvecm::BacktestOptions opt;
  opt.window = rc.backtest.window;
  opt.origins = rc.backtest.origins;
  opt.stride = rc.backtest.stride;
  opt.point_mean = rc.backtest.point_mean;

  std::vector<std::string> labels;
  std::vector<tvecm::ModelBacktest> runs;
  std::vector<std::string> failed;
  for (const auto& g : rc.grid) {
    try {
      opt.seed = g.model.seed;
      runs.push_back(tvecm::backtest_model(panel, g.model, rc.deterministics, opt));
      labels.push_back(g.name);
    } catch (const std::exception& e) {
      std::cerr << "warning: model '" << g.name
                << "' failed and is excluded from scoring: " << e.what() << "\n";
      failed.push_back(g.name);
    }
  }
  if (runs.empty())
    throw tvecm::ValidationError("every grid entry failed; nothing to score");

  const Eigen::Index H = runs.front().loss_sq.size();
  const Eigen::Index K = static_cast<Eigen::Index>(runs.size());
  Eigen::MatrixXd loss_sq(H, K), loss_crps(H, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    loss_sq.col(k) = runs[static_cast<std::size_t>(k)].loss_sq;
    loss_crps.col(k) = runs[static_cast<std::size_t>(k)].loss_crps;
  }
  write_loss_csv(out_dir + "/loss_sq.csv", labels, loss_sq);
  write_loss_csv(out_dir + "/loss_crps.csv", labels, loss_crps);
  manifest.output(out_dir + "/loss_sq.csv");
  manifest.output(out_dir + "/loss_crps.csv");

  {
    std::ofstream out(out_dir + "/scores.csv");
    out << "model,statistic";
    for (const auto& n : panel.names) out << ',' << tvecm::csv_quote(n);
    out << ",total,stride\n";
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& r = runs[static_cast<std::size_t>(k)];
      out << tvecm::csv_quote(labels[static_cast<std::size_t>(k)]) << ",rmse";
      for (Eigen::Index j = 0; j < r.rmse_levels.per_series.size(); ++j)
        out << ',' << r.rmse_levels.per_series(j);
      out << ',' << r.rmse_levels.total << ',' << r.stride_used << '\n';
      out << tvecm::csv_quote(labels[static_cast<std::size_t>(k)]) << ",crps";
      for (Eigen::Index j = 0; j < r.crps.cols(); ++j)
        out << ',' << r.crps.col(j).mean();
      out << ',' << r.crps_total << ',' << r.stride_used << '\n';
    }
  }
  manifest.output(out_dir + "/scores.csv");

  if (K >= 2 && H >= 20) {
    tvecm::McsOptions mcs_opt;
    mcs_opt.block_length = rc.backtest.block_length;
    mcs_opt.replications = rc.backtest.replications;
    write_mcs_csv(out_dir + "/mcs_sq.csv",
                  tvecm::mcs(loss_sq, labels, rc.backtest.alpha, mcs_opt));
    write_mcs_csv(out_dir + "/mcs_crps.csv",
                  tvecm::mcs(loss_crps, labels, rc.backtest.alpha, mcs_opt));
    manifest.output(out_dir + "/mcs_sq.csv");
    manifest.output(out_dir + "/mcs_crps.csv");
  }
  if (!failed.empty()) manifest.doc["excluded_models"] = failed;
  manifest.write();
  guard.disarm();
  std::cout << "backtest written to " << out_dir << "\n";
  return failed.empty() ? kExitOk : kExitPartial;
}

int cmd_synth(const tvecm::SynthSpec& spec, const std::string& out_dir) {
  OutputGuard guard(out_dir);
  Manifest manifest(out_dir);
  tvecm::SynthData data = tvecm::generate_synth(spec);

  const std::string data_path = out_dir + "/data.csv";
  {
    std::ofstream out(data_path);
    out << "timestamp";
    for (const auto& n : data.panel.names) out << ',' << tvecm::csv_quote(n);
    out << '\n';
    out.precision(17);
    for (Eigen::Index r = 0; r < data.panel.t_raw(); ++r) {
      out << tvecm::format_timestamp(data.panel.timestamps[r]);
      for (Eigen::Index j = 0; j < data.panel.m(); ++j)
        out << ',' << data.panel.levels(r, j);
      out << '\n';
    }
  }
  {
    json truth;
    truth["rank_path"] = data.truth.rank_path;
    truth["sv"] = {{"mu", data.truth.sv_mu},
                   {"phi", data.truth.sv_phi},
                   {"sigma", data.truth.sv_sigma},
                   {"nu", data.truth.nu}};
    std::vector<std::vector<double>> pi_rows;
    for (Eigen::Index i = 0; i < data.truth.pi.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index j = 0; j < data.truth.pi.cols(); ++j)
        row.push_back(data.truth.pi(i, j));
      pi_rows.push_back(std::move(row));
    }
    truth["pi"] = pi_rows;
    std::ofstream out(out_dir + "/truth.json");
    out << truth.dump(2) << "\n";
  }
  manifest.doc["seed"] = spec.seed;
  manifest.output(data_path);
  manifest.output(out_dir + "/truth.json");
  manifest.write();
  guard.disarm();
  std::cout << "synthetic dataset written to " << out_dir << "\n";
  return kExitOk;
}

int cmd_report(const std::string& archive_dir) {
  std::ifstream in(archive_dir + "/metadata.json");
  if (!in) throw tvecm::DataError("no metadata.json in " + archive_dir);
  json meta = json::parse(in);
  std::cout << "archive: " << archive_dir << "\n"
            << "model: " << meta["config"]["model_class"].get<std::string>()
            << ", errors: " << meta["config"]["error_dist"].get<std::string>()
            << ", tvp: " << (meta["config"]["tvp"].get<bool>() ? "yes" : "no")
            << "\n"
            << "dims: T=" << meta["dims"]["T"] << " M=" << meta["dims"]["M"]
            << " q=" << meta["dims"]["q"] << "\n"
            << "retained draws: " << meta["retained"] << "\n"
            << "diagnostics: " << meta["diagnostics"].dump() << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw tvecm::DataError("cannot open manifest: " + manifest_path);
  json manifest = json::parse(in);
  const std::string dir = fs::path(manifest_path).parent_path().string();
  int mismatches = 0;
  auto check = [&](const std::string& label, const std::string& path,
                   const std::string& expected) {
    try {
      const std::string actual = tvecm::hash_file(path);
      if (actual != expected) {
        std::cerr << "hash mismatch for " << label << " (" << path << ")\n";
        ++mismatches;
      }
    } catch (const std::exception& e) {
      std::cerr << "cannot verify " << label << ": " << e.what() << "\n";
      ++mismatches;
    }
  };
  for (const char* role : {"config", "data"}) {
    const std::string pk = std::string(role) + "_path";
    const std::string hk = std::string(role) + "_hash";
    if (manifest.contains(pk))
      check(role, manifest[pk].get<std::string>(), manifest[hk].get<std::string>());
  }
  for (auto& [name, hash] : manifest["outputs"].items())
    check(name, (fs::path(dir) / name).string(), hash.get<std::string>());
  if (mismatches == 0) {
    std::cout << "manifest verified: all hashes match\n";
    return kExitOk;
  }
  std::cerr << mismatches << " hash mismatch(es)\n";
  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying-parameter VECM estimation, sparsification and "
               "forecast evaluation"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_dir, archive_dir, manifest_path;
  int threads = 1;
  json overrides = json::object();
  std::uint64_t seed_override = 0;
  int draws_override = 0;

  auto* est = app.add_subcommand("estimate", "Run the sampler and write an archive");
  est->add_option("--config", config_path, "run config JSON")->required();
  est->add_option("--data", data_path, "input CSV panel")->required();
  est->add_option("--out", out_dir, "output directory");
  est->add_option("--seed", seed_override, "override the config seed");
  est->add_option("--draws", draws_override, "override the draw count");
  est->add_option("--threads", threads,
                  "worker pool size (this build executes serially)");

  auto* bt = app.add_subcommand("backtest", "Rolling backtest over a model grid");
  bt->add_option("--config", config_path, "run config JSON with a grid")->required();
  bt->add_option("--data", data_path, "input CSV panel")->required();
  bt->add_option("--out", out_dir, "output directory");
  bt->add_option("--threads", threads,
                 "worker pool size (this build executes serially)");

  tvecm::SynthSpec spec;
  bool synth_student_t = false;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset with truth");
  sy->add_option("--m", spec.M, "number of series");
  sy->add_option("--t", spec.T, "number of usable time points");
  sy->add_option("--rank", spec.rank, "true cointegration rank");
  sy->add_option("--tvp-amplitude", spec.tvp_amplitude, "coefficient drift scale");
  sy->add_option("--sv-mu", spec.sv_mu, "log-volatility level");
  sy->add_option("--sv-phi", spec.sv_phi, "log-volatility persistence");
  sy->add_option("--sv-sigma", spec.sv_sigma, "log-volatility innovation s.d.");
  sy->add_flag("--student-t", synth_student_t, "draw t-distributed shocks");
  sy->add_option("--nu", spec.nu, "degrees of freedom under --student-t");
  sy->add_option("--seed", spec.seed, "generator seed");
  sy->add_option("--out", out_dir, "output directory");

  auto* rep = app.add_subcommand("report", "Print an archive summary");
  rep->add_option("--archive", archive_dir, "archive directory")->required();

  auto* ver = app.add_subcommand("verify", "Re-hash manifest inputs and outputs");
  ver->add_option("--manifest", manifest_path, "manifest.json path")->required();

  CLI11_PARSE(app, argc, argv);
  (void)threads;

  try {
    if (est->parsed()) {
      if (est->count("--seed")) overrides["seed"] = seed_override;
      if (est->count("--draws")) overrides["draws"] = draws_override;
      if (out_dir.empty()) out_dir = default_output_root() + "/estimate";
      return cmd_estimate(config_path, data_path, out_dir, overrides);
    }
    if (bt->parsed()) {
      if (out_dir.empty()) out_dir = default_output_root() + "/backtest";
      return cmd_backtest(config_path, data_path, out_dir);
    }
    if (sy->parsed()) {
      spec.student_t = synth_student_t;
      if (out_dir.empty()) out_dir = default_output_root() + "/synth";
      return cmd_synth(spec, out_dir);
    }
    if (rep->parsed()) return cmd_report(archive_dir);
    if (ver->parsed()) return cmd_verify(manifest_path);
  } catch (const tvecm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
