#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tvecm/csv.hpp"
#include "tvecm/errors.hpp"

namespace tvecm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

/// Days-from-civil (Hinnant). Valid for the proleptic Gregorian calendar.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

/// ISO-8601 date or datetime -> epoch seconds. Accepts "YYYY-MM-DD",
/// optionally followed by " HH:MM[:SS]" or "THH:MM[:SS]".
inline std::int64_t parse_timestamp(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-')
    throw DataError("unparseable timestamp: '" + s + "'");
  try {
    y = std::stoi(s.substr(0, 4));
    mo = std::stoi(s.substr(5, 2));
    d = std::stoi(s.substr(8, 2));
    if (s.size() >= 16) {
      h = std::stoi(s.substr(11, 2));
      mi = std::stoi(s.substr(14, 2));
      if (s.size() >= 19) se = std::stoi(s.substr(17, 2));
    }
  } catch (const std::exception&) {
    throw DataError("unparseable timestamp: '" + s + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

inline std::string format_timestamp(std::int64_t epoch_s) {
  std::int64_t days = epoch_s / 86400;
  std::int64_t sod = epoch_s - days * 86400;
  if (sod < 0) {
    sod += 86400;
    days -= 1;
  }
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  if (sod == 0) {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld", y, m, d,
                  static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod / 60) % 60),
                  static_cast<long long>(sod % 60));
  }
  return buf;
}

/// Day of week, 0 = Monday ... 6 = Sunday.
inline int day_of_week(std::int64_t epoch_s) {
  std::int64_t days = epoch_s / 86400;
  if (epoch_s < 0 && epoch_s % 86400 != 0) days -= 1;
  return static_cast<int>(((days % 7) + 10) % 7);  // 1970-01-01 was a Thursday
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

enum class Interpolation { Linear, Reject };

struct PanelSchema {
  std::string timestamp_column;
  std::vector<std::string> endogenous;
  std::vector<std::string> exogenous;  // may be empty
};

/// Ingested multivariate series. Levels are stored after optional per-series
/// scaling; `scales` records the divisors so forecasts can be un-scaled.
struct Panel {
  std::vector<std::int64_t> timestamps;  // strictly increasing, epoch seconds
  MatrixXd levels;                       // T_raw x M
  MatrixXd factors;                      // T_raw x q_f (0 columns if none)
  std::vector<std::string> names;        // M + q_f labels
  VectorXd scales;                       // M divisors applied to levels

  Eigen::Index t_raw() const { return levels.rows(); }
  Eigen::Index m() const { return levels.cols(); }
  Eigen::Index q_f() const { return factors.cols(); }
};

namespace detail {

inline bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string low;
  for (char c : cell) low += static_cast<char>(std::tolower(c));
  return low == "na" || low == "nan" || low == "null";
}

inline void fill_column(MatrixXd& mat, Eigen::Index col,
                        const std::vector<std::string>& cells,
                        const std::string& colname, Interpolation policy) {
  const Eigen::Index n = mat.rows();
  std::vector<bool> missing(n, false);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (is_missing(cells[r])) {
      missing[r] = true;
      if (policy == Interpolation::Reject)
        throw DataError("missing value at row " + std::to_string(r + 1) +
                        ", column '" + colname + "' under policy=reject");
    } else {
      try {
        mat(r, col) = std::stod(cells[r]);
      } catch (const std::exception&) {
        throw DataError("non-numeric value '" + cells[r] + "' at row " +
                        std::to_string(r + 1) + ", column '" + colname + "'");
      }
    }
  }
  // linear interpolation over gaps; edges extend the nearest observed value
  Eigen::Index prev = -1;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (missing[r]) continue;
    if (prev < 0 && r > 0) {
      for (Eigen::Index k = 0; k < r; ++k) mat(k, col) = mat(r, col);
    } else if (prev >= 0 && r > prev + 1) {
      for (Eigen::Index k = prev + 1; k < r; ++k) {
        double frac = static_cast<double>(k - prev) / static_cast<double>(r - prev);
        mat(k, col) = mat(prev, col) + frac * (mat(r, col) - mat(prev, col));
      }
    }
    prev = r;
  }
  if (prev < 0)
    throw DataError("column '" + colname + "' has no observed values");
  for (Eigen::Index k = prev + 1; k < n; ++k) mat(k, col) = mat(prev, col);
}

}  // namespace detail

/// Load a CSV panel. First column of the schema names the timestamp column;
/// remaining declared columns are numeric. Gaps are handled per `policy`.
inline Panel load_panel(const std::string& path, const PanelSchema& schema,
                        Interpolation policy, bool standardize = false) {
  if (schema.endogenous.empty())
    throw SchemaError("schema declares no endogenous columns");
  auto rows = read_csv(path);
  if (rows.size() < 2) throw DataError("file has no data rows: " + path);
  const auto& header = rows.front();

  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("column '" + name + "' not found in " + path);
  };

  const std::size_t ts_col = find_col(schema.timestamp_column);
  std::vector<std::size_t> endo_cols, exo_cols;
  for (const auto& n : schema.endogenous) endo_cols.push_back(find_col(n));
  for (const auto& n : schema.exogenous) exo_cols.push_back(find_col(n));

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size()) - 1;
  Panel panel;
  panel.timestamps.resize(n);
  panel.levels.resize(n, static_cast<Eigen::Index>(endo_cols.size()));
  panel.factors.resize(n, static_cast<Eigen::Index>(exo_cols.size()));
  for (const auto& nm : schema.endogenous) panel.names.push_back(nm);
  for (const auto& nm : schema.exogenous) panel.names.push_back(nm);

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = rows[r + 1];
    if (rec.size() != header.size())
      throw DataError("row " + std::to_string(r + 1) + " has " +
                      std::to_string(rec.size()) + " fields, expected " +
                      std::to_string(header.size()));
    panel.timestamps[r] = parse_timestamp(rec[ts_col]);
    if (r > 0 && panel.timestamps[r] <= panel.timestamps[r - 1])
      throw DataError("timestamps not strictly increasing at row " +
                      std::to_string(r + 1));
  }

  auto column_cells = [&](std::size_t col) {
    std::vector<std::string> cells(n);
    for (Eigen::Index r = 0; r < n; ++r) cells[r] = rows[r + 1][col];
    return cells;
  };
  for (std::size_t j = 0; j < endo_cols.size(); ++j)
    detail::fill_column(panel.levels, static_cast<Eigen::Index>(j),
                        column_cells(endo_cols[j]), schema.endogenous[j], policy);
  for (std::size_t j = 0; j < exo_cols.size(); ++j)
    detail::fill_column(panel.factors, static_cast<Eigen::Index>(j),
                        column_cells(exo_cols[j]), schema.exogenous[j], policy);

  panel.scales = VectorXd::Ones(panel.m());
  if (standardize) {
    for (Eigen::Index j = 0; j < panel.m(); ++j) {
      double mean = panel.levels.col(j).mean();
      double sd = std::sqrt((panel.levels.col(j).array() - mean).square().mean());
      if (sd > 0) {
        panel.scales(j) = sd;
        panel.levels.col(j) /= sd;
      }
    }
  }
  return panel;
}

// ---------------------------------------------------------------------------
// Design
// ---------------------------------------------------------------------------

/// Recipe for the deterministic-term block c_t.
struct Deterministics {
  bool intercept = true;
  bool day_of_week = false;  // 6 dummies if intercept, 7 otherwise
  bool trend = false;

  int n_columns() const {
    int n = 0;
    if (intercept) n += 1;
    if (day_of_week) n += intercept ? 6 : 7;
    if (trend) n += 1;
    return n;
  }
};

/// Full-data matrices consumed by the sampler and the sparsifier.
struct Design {
  MatrixXd dy;  // T x M first differences
  MatrixXd w;   // T x q, row t = (y_{t-1}', f_{t-1}')
  MatrixXd x;   // T x J, row t = (dy_{t-1}', ..., dy_{t-P}', c_t')
  std::vector<std::int64_t> timestamps;  // per design row
  Deterministics c_spec;
  int P = 1;
  Eigen::Index M = 0, q_f = 0, N = 0;

  Eigen::Index T() const { return dy.rows(); }
  Eigen::Index q() const { return M + q_f; }
  Eigen::Index J() const { return M * P + N; }
};

inline VectorXd deterministic_row(const Deterministics& spec, std::int64_t ts,
                                  Eigen::Index t_index, Eigen::Index T) {
  VectorXd c(spec.n_columns());
  Eigen::Index k = 0;
  if (spec.intercept) c(k++) = 1.0;
  if (spec.day_of_week) {
    // one-hot over days; with an intercept, Monday (dow 0) is the reference
    int dow = day_of_week(ts);
    int n_dum = spec.intercept ? 6 : 7;
    int base = spec.intercept ? 1 : 0;
    for (int d = 0; d < n_dum; ++d) c(k + d) = (dow == d + base) ? 1.0 : 0.0;
    k += n_dum;
  }
  if (spec.trend) c(k++) = static_cast<double>(t_index) / static_cast<double>(T);
  return c;
}

/// Assemble differences, lagged-level and lagged-difference blocks, and
/// deterministic terms. Row t corresponds to raw index P+1+t.
inline Design build_design(const Panel& panel, int P,
                           const Deterministics& deterministics) {
  if (P < 1) throw DimensionError("lag order P must be >= 1");
  if (panel.t_raw() <= P + 2)
    throw DimensionError("too few rows: T_raw = " + std::to_string(panel.t_raw()) +
                         " requires > " + std::to_string(P + 2));

  const Eigen::Index t_raw = panel.t_raw();
  const Eigen::Index M = panel.m();
  const Eigen::Index q_f = panel.q_f();
  const Eigen::Index T = t_raw - P - 1;

  Design d;
  d.c_spec = deterministics;
  d.P = P;
  d.M = M;
  d.q_f = q_f;
  d.N = deterministics.n_columns();

  MatrixXd diff(t_raw - 1, M);  // diff.row(s-1) = y_s - y_{s-1}
  for (Eigen::Index s = 1; s < t_raw; ++s)
    diff.row(s - 1) = panel.levels.row(s) - panel.levels.row(s - 1);

  d.dy.resize(T, M);
  d.w.resize(T, M + q_f);
  d.x.resize(T, M * P + d.N);
  d.timestamps.resize(T);

  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index s = P + 1 + t;
    d.timestamps[t] = panel.timestamps[s];
    d.dy.row(t) = diff.row(s - 1);
    d.w.block(t, 0, 1, M) = panel.levels.row(s - 1);
    if (q_f > 0) d.w.block(t, M, 1, q_f) = panel.factors.row(s - 1);
    for (int p = 0; p < P; ++p)
      d.x.block(t, p * M, 1, M) = diff.row(s - 2 - p);
    if (d.N > 0)
      d.x.block(t, M * P, 1, d.N) =
          deterministic_row(deterministics, panel.timestamps[s], t, T).transpose();
  }
  return d;
}

}  // namespace tvecm
