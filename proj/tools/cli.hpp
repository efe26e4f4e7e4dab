#pragma once

// Helpers for the robscatter command-line tool: CSV ingestion, JSON output
// and experiment configuration files.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "robscatter/robscatter.hpp"

namespace robscatter::cli {

/// Usage or input problems; the tool exits with status 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Table {
  std::vector<std::string> header;  // empty when the file has none
  DataMatrix data;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_number(const std::string& field, double& v) {
  if (field.empty()) return false;
  const char* first = field.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), v);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace detail

/// Comma-separated numeric table. A first row containing any non-numeric field is
/// taken as a header. Blank lines are skipped; anything else that is not a finite
/// number is reported with its line and column.
inline Table read_csv(std::istream& in, const std::string& name) {
  Table t;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    std::vector<double> row(fields.size());
    std::size_t bad = fields.size();
    for (std::size_t k = 0; k < fields.size() && bad == fields.size(); ++k)
      if (!detail::parse_number(fields[k], row[k])) bad = k;
    if (first) {
      first = false;
      cols = fields.size();
      if (bad != fields.size()) {
        t.header = fields;
        continue;
      }
    }
    if (fields.size() != cols)
      throw UsageError(name + ": line " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                       " columns, found " + std::to_string(fields.size()));
    if (bad != fields.size())
      throw UsageError(name + ": line " + std::to_string(line_no) + ", column " + std::to_string(bad + 1) +
                       ": not a number: '" + fields[bad] + "'");
    for (std::size_t k = 0; k < cols; ++k)
      if (!std::isfinite(row[k]))
        throw UsageError(name + ": line " + std::to_string(line_no) + ", column " + std::to_string(k + 1) +
                         ": non-finite value");
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw UsageError(name + ": no data rows");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  t.data = DataMatrix(std::move(m));
  return t;
}

inline Table read_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open " + path);
  return read_csv(f, path);
}

inline Vector parse_vector(const std::string& text) {
  Vector v;
  for (const auto& f : detail::split(text)) {
    double x = 0.0;
    if (!detail::parse_number(f, x) || !std::isfinite(x)) throw UsageError("bad number in list: '" + f + "'");
    v.push_back(x);
  }
  return v;
}

inline nlohmann::json to_json(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}
inline nlohmann::json to_json(const SymMatrix& m) { return to_json(m.matrix()); }

inline nlohmann::json to_json(const ScatterResult& r) {
  nlohmann::json j;
  j["estimator"] = spec_tag(r.spec);
  j["scatter"] = to_json(r.scatter);
  j["location"] = r.location ? nlohmann::json(*r.location) : nlohmann::json(nullptr);
  try {
    j["pseudo_correlation"] = to_json(pseudo_correlation_matrix(r.scatter));
  } catch (const Error&) {
    j["pseudo_correlation"] = nullptr;
  }
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["dropped"] = r.dropped;
  return j;
}

/// Scatter matrix as CSV, one row per line.
inline void write_scatter_csv(std::ostream& os, const ScatterResult& r) {
  os << std::setprecision(17);
  for (std::size_t i = 0; i < r.scatter.dim(); ++i) {
    for (std::size_t j = 0; j < r.scatter.dim(); ++j) os << (j ? "," : "") << r.scatter(i, j);
    os << '\n';
  }
}

/// Experiment configuration from JSON. Keys mirror ExperimentConfig; missing keys
/// keep the figure's defaults, unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, std::optional<Figure> figure_override = {}) {
  if (!j.is_object()) throw UsageError("experiment config must be a JSON object");
  std::optional<Figure> fig = figure_override;
  if (!fig) {
    if (!j.contains("figure")) throw UsageError("experiment config needs a figure");
    fig = parse_figure(j.at("figure").get<std::string>());
  }
  ExperimentConfig c = default_config(*fig, j.value("full_scale", false));
  for (const auto& [key, v] : j.items()) {
    if (key == "figure" || key == "full_scale") continue;
    else if (key == "n") c.n = v.get<std::size_t>();
    else if (key == "p") c.p = v.get<std::size_t>();
    else if (key == "reps") c.reps = v.get<std::size_t>();
    else if (key == "seed") c.seed = Seed{v.get<std::uint64_t>()};
    else if (key == "estimators") c.estimators = v.get<std::vector<std::string>>();
    else if (key == "out") c.out = v.get<std::string>();
    else if (key == "threads") c.threads = v.get<std::size_t>();
    else if (key == "alphas") c.alphas = v.get<std::vector<double>>();
    else if (key == "p_grid") c.p_grid = v.get<std::vector<std::size_t>>();
    else if (key == "source") c.source = v.get<std::string>();
    else if (key == "n_grid") c.n_grid = v.get<std::vector<std::size_t>>();
    else if (key == "timing_runs") c.timing_runs = v.get<std::size_t>();
    else throw UsageError("unknown experiment config key: " + key);
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"figure", to_string(c.figure)}, {"n", c.n},           {"p", c.p},
          {"reps", c.reps},                {"seed", c.seed.value}, {"estimators", c.estimators},
          {"out", c.out},                  {"threads", c.threads}, {"alphas", c.alphas},
          {"p_grid", c.p_grid},            {"source", c.source},   {"n_grid", c.n_grid},
          {"timing_runs", c.timing_runs}};
}

}  // namespace robscatter::cli
