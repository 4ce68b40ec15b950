#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tvecm/archive_io.hpp"
#include "tvecm/data.hpp"
#include "tvecm/errors.hpp"
#include "tvecm/sampler.hpp"

namespace tvecm {

struct DataConfig {
  PanelSchema schema;
  Interpolation policy = Interpolation::Linear;
  bool standardize = false;
};

struct GridEntry {
  std::string name;
  ModelConfig model;
};

struct BacktestConfig {
  int window = 400;
  int origins = 100;
  int stride = 1;
  double alpha = 0.25;
  int block_length = 0;
  int replications = 5000;
  bool point_mean = false;
};

/// One declarative run configuration: data schema, deterministic terms, the
/// single-model settings used by `estimate`, and the model grid plus backtest
/// window used by `backtest`.
struct RunConfig {
  DataConfig data;
  Deterministics deterministics;
  ModelConfig model;
  std::vector<GridEntry> grid;
  BacktestConfig backtest;
};

inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["data"] = {
      {"timestamp_column", rc.data.schema.timestamp_column},
      {"endogenous", rc.data.schema.endogenous},
      {"exogenous", rc.data.schema.exogenous},
      {"interpolation",
       rc.data.policy == Interpolation::Linear ? "linear" : "reject"},
      {"standardize", rc.data.standardize},
  };
  j["deterministics"] = {
      {"intercept", rc.deterministics.intercept},
      {"day_of_week", rc.deterministics.day_of_week},
      {"trend", rc.deterministics.trend},
  };
  j["model"] = config_to_json(rc.model);
  j["grid"] = nlohmann::json::array();
  for (const auto& g : rc.grid)
    j["grid"].push_back({{"name", g.name}, {"model", config_to_json(g.model)}});
  j["backtest"] = {
      {"window", rc.backtest.window},
      {"origins", rc.backtest.origins},
      {"stride", rc.backtest.stride},
      {"alpha", rc.backtest.alpha},
      {"block_length", rc.backtest.block_length},
      {"replications", rc.backtest.replications},
      {"point_mean", rc.backtest.point_mean},
  };
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  std::vector<std::string> bad;
  auto get = [&](const nlohmann::json& src, const char* key, auto& field) {
    if (!src.contains(key)) return;
    try {
      field = src.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      bad.push_back(std::string("field '") + key + "' has the wrong type");
    }
  };

  if (j.contains("data")) {
    const auto& d = j.at("data");
    get(d, "timestamp_column", rc.data.schema.timestamp_column);
    get(d, "endogenous", rc.data.schema.endogenous);
    get(d, "exogenous", rc.data.schema.exogenous);
    get(d, "standardize", rc.data.standardize);
    std::string interp = "linear";
    get(d, "interpolation", interp);
    if (interp == "linear") rc.data.policy = Interpolation::Linear;
    else if (interp == "reject") rc.data.policy = Interpolation::Reject;
    else bad.push_back("interpolation must be 'linear' or 'reject'");
  } else {
    bad.push_back("missing 'data' section");
  }
  if (rc.data.schema.timestamp_column.empty())
    bad.push_back("data.timestamp_column is required");
  if (rc.data.schema.endogenous.empty())
    bad.push_back("data.endogenous must list at least one column");

  if (j.contains("deterministics")) {
    const auto& d = j.at("deterministics");
    get(d, "intercept", rc.deterministics.intercept);
    get(d, "day_of_week", rc.deterministics.day_of_week);
    get(d, "trend", rc.deterministics.trend);
  }

  try {
    if (j.contains("model")) rc.model = config_from_json(j.at("model"));
  } catch (const ValidationError& e) {
    bad.push_back(e.what());
  }
  if (j.contains("grid")) {
    for (const auto& g : j.at("grid")) {
      GridEntry entry;
      get(g, "name", entry.name);
      if (entry.name.empty()) bad.push_back("every grid entry needs a name");
      try {
        if (g.contains("model")) entry.model = config_from_json(g.at("model"));
        else bad.push_back("grid entry '" + entry.name + "' has no model");
      } catch (const ValidationError& e) {
        bad.push_back(e.what());
      }
      rc.grid.push_back(std::move(entry));
    }
  }
  if (j.contains("backtest")) {
    const auto& b = j.at("backtest");
    get(b, "window", rc.backtest.window);
    get(b, "origins", rc.backtest.origins);
    get(b, "stride", rc.backtest.stride);
    get(b, "alpha", rc.backtest.alpha);
    get(b, "block_length", rc.backtest.block_length);
    get(b, "replications", rc.backtest.replications);
    get(b, "point_mean", rc.backtest.point_mean);
  }
  if (rc.backtest.window < 10) bad.push_back("backtest.window too small");
  if (rc.backtest.origins < 1) bad.push_back("backtest.origins must be positive");
  if (rc.backtest.stride < 1) bad.push_back("backtest.stride must be >= 1");
  if (!(rc.backtest.alpha > 0.0 && rc.backtest.alpha < 1.0))
    bad.push_back("backtest.alpha must lie in (0, 1)");

  if (!bad.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw ValidationError(msg);
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace tvecm
