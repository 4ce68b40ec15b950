#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "tvecm/config.hpp"

using namespace tvecm;
using nlohmann::json;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TVECM_CLI_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("tvecm_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json minimal_run_config() {
  json j;
  j["data"] = {{"timestamp_column", "timestamp"},
               {"endogenous", {"y0", "y1"}}};
  j["model"] = {{"model_class", "vecm"}, {"draws", 40},   {"burnin", 10},
                {"thin", 2},             {"p", 1},        {"seed", 5}};
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

}  // namespace

TEST_CASE("run config survives a JSON round trip") {
  RunConfig rc;
  rc.data.schema.timestamp_column = "ts";
  rc.data.schema.endogenous = {"a", "b", "c"};
  rc.data.schema.exogenous = {"f"};
  rc.data.policy = Interpolation::Reject;
  rc.data.standardize = true;
  rc.deterministics.day_of_week = true;
  rc.deterministics.trend = true;
  rc.model.model_class = ModelClass::VecmFixedRank;
  rc.model.fixed_rank = 2;
  rc.model.tvp = false;
  rc.model.error_dist = ErrorDist::StudentT;
  rc.model.P = 3;
  rc.model.draws = 123;
  rc.model.burnin = 45;
  rc.model.thin = 6;
  rc.model.seed = 99;
  rc.model.s0 = 0.7;
  rc.model.sparsify = false;
  rc.model.phi_per_draw = false;
  rc.grid.push_back({"alt", ModelConfig{}});
  rc.backtest.window = 55;
  rc.backtest.origins = 21;
  rc.backtest.stride = 7;
  rc.backtest.alpha = 0.1;

  RunConfig back = run_config_from_json(run_config_to_json(rc));
  CHECK(back.data.schema.timestamp_column == "ts");
  CHECK(back.data.schema.endogenous == rc.data.schema.endogenous);
  CHECK(back.data.schema.exogenous == rc.data.schema.exogenous);
  CHECK(back.data.policy == Interpolation::Reject);
  CHECK(back.data.standardize);
  CHECK(back.deterministics.day_of_week);
  CHECK(back.deterministics.trend);
  CHECK(back.model.model_class == ModelClass::VecmFixedRank);
  CHECK(back.model.fixed_rank == 2);
  CHECK_FALSE(back.model.tvp);
  CHECK(back.model.error_dist == ErrorDist::StudentT);
  CHECK(back.model.P == 3);
  CHECK(back.model.draws == 123);
  CHECK(back.model.burnin == 45);
  CHECK(back.model.thin == 6);
  CHECK(back.model.seed == 99);
  CHECK(back.model.s0 == 0.7);
  CHECK_FALSE(back.model.sparsify);
  CHECK_FALSE(back.model.phi_per_draw);
  REQUIRE(back.grid.size() == 1);
  CHECK(back.grid[0].name == "alt");
  CHECK(back.backtest.window == 55);
  CHECK(back.backtest.origins == 21);
  CHECK(back.backtest.stride == 7);
  CHECK(back.backtest.alpha == 0.1);
}

TEST_CASE("run config parsing reports every violation at once") {
  json j;
  j["data"] = {{"timestamp_column", ""}, {"endogenous", json::array()},
               {"interpolation", "cubic"}};
  j["backtest"] = {{"window", 2}, {"stride", 0}, {"alpha", 1.5}};
  try {
    run_config_from_json(j);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK_THAT(msg, ContainsSubstring("timestamp_column"));
    CHECK_THAT(msg, ContainsSubstring("endogenous"));
    CHECK_THAT(msg, ContainsSubstring("interpolation"));
    CHECK_THAT(msg, ContainsSubstring("window"));
    CHECK_THAT(msg, ContainsSubstring("stride"));
    CHECK_THAT(msg, ContainsSubstring("alpha"));
  }
}

TEST_CASE("cli synth-estimate-report-verify pipeline") {
  const fs::path root = fresh_dir("pipeline");
  const fs::path synth_dir = root / "synth";
  const fs::path est_dir = root / "estimate";

  REQUIRE(run_cli("synth --m 2 --t 60 --rank 1 --seed 4 --out " +
                  synth_dir.string()) == 0);
  CHECK(fs::exists(synth_dir / "data.csv"));
  CHECK(fs::exists(synth_dir / "truth.json"));
  CHECK(fs::exists(synth_dir / "manifest.json"));

  write_json(root / "config.json", minimal_run_config());
  REQUIRE(run_cli("estimate --config " + (root / "config.json").string() +
                  " --data " + (synth_dir / "data.csv").string() + " --out " +
                  est_dir.string()) == 0);
  CHECK(fs::exists(est_dir / "metadata.json"));
  CHECK(fs::exists(est_dir / "draws.bin"));
  CHECK(fs::exists(est_dir / "manifest.json"));

  CHECK(run_cli("report --archive " + est_dir.string()) == 0);
  CHECK(run_cli("verify --manifest " + (est_dir / "manifest.json").string()) ==
        0);

  SECTION("verify flags a tampered output") {
    std::ofstream out(est_dir / "pi_mean.csv", std::ios::app);
    out << "tampered\n";
    out.close();
    CHECK(run_cli("verify --manifest " +
                  (est_dir / "manifest.json").string()) == 2);
  }
}

TEST_CASE("cli determinism: same seed reproduces draws.bin byte for byte") {
  const fs::path root = fresh_dir("determ");
  REQUIRE(run_cli("synth --m 2 --t 60 --rank 1 --seed 4 --out " +
                  (root / "synth").string()) == 0);
  write_json(root / "config.json", minimal_run_config());
  for (const char* sub : {"a", "b"})
    REQUIRE(run_cli("estimate --config " + (root / "config.json").string() +
                    " --data " + (root / "synth" / "data.csv").string() +
                    " --out " + (root / sub).string()) == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string a = slurp(root / "a" / "draws.bin");
  CHECK(a.size() > 0);
  CHECK(a == slurp(root / "b" / "draws.bin"));
}

TEST_CASE("cli rejects invalid configuration with exit code 2") {
  const fs::path root = fresh_dir("invalid");
  REQUIRE(run_cli("synth --m 2 --t 40 --rank 1 --out " +
                  (root / "synth").string()) == 0);
  json bad = minimal_run_config();
  bad["model"]["p"] = 0;
  bad["model"]["thin"] = 0;
  write_json(root / "config.json", bad);
  CHECK(run_cli("estimate --config " + (root / "config.json").string() +
                " --data " + (root / "synth" / "data.csv").string() +
                " --out " + (root / "out").string() + " 2>/dev/null") == 2);
  // the failed run must not leave a partial output directory behind
  CHECK_FALSE(fs::exists(root / "out"));
}

TEST_CASE("cli reports missing files with exit code 2") {
  CHECK(run_cli("report --archive /nonexistent 2>/dev/null") == 2);
  CHECK(run_cli("verify --manifest /nonexistent/manifest.json 2>/dev/null") ==
        2);
}
