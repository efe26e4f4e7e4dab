// robscatter: robust scatter estimation, plug-in methods and Monte Carlo studies
// on CSV data. Exit status: 0 success, 1 usage or input error, 2 estimation failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

namespace rs = robscatter;
using rs::cli::UsageError;
using nlohmann::json;

namespace {

struct EstimatorFlags {
  std::string name = "cov";
  std::optional<double> alpha, q;
  std::optional<std::size_t> h;
  bool symmetrized = false;
  std::string fixed_location;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app, const std::string& flag = "--estimator") {
    app->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
    app->add_option(flag + ",-e", name, "cov, wcov<alpha>, cauchy|CAU, huber|HUB, tyler|TYL, mve, mcd; prefix s to symmetrize")
        ->capture_default_str();
    app->add_option("--alpha", alpha, "wcov exponent");
    app->add_option("--q", q, "Huber tuning: chi-square quantile level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--h", h, "MVE/MCD subset size")->check(CLI::PositiveNumber);
    app->add_flag("--symmetrized", symmetrized, "apply the estimator to pairwise differences");
    app->add_option("--fixed-location", fixed_location, "comma-separated fixed location");
    app->add_option("--seed", seed, "seed for MVE/MCD elemental starts");
  }

  rs::ScatterSpec spec(std::size_t p) const {
    rs::ScatterSpec s = rs::parse_estimator(name);
    if (symmetrized) s.symmetrized = true;
    if (alpha) {
      if (s.family != rs::Family::wcov) throw UsageError("--alpha applies to wcov only");
      s.alpha = *alpha;
    }
    if (q) s.q = *q;
    if (h) s.subset.h = *h;
    if (seed) s.subset.seed = *seed;
    if (!fixed_location.empty()) {
      s.fixed_location = rs::cli::parse_vector(fixed_location);
      if (s.fixed_location->size() != p)
        throw UsageError("--fixed-location has " + std::to_string(s.fixed_location->size()) + " entries, data has " +
                         std::to_string(p) + " columns");
    }
    return s;
  }
};

/// --threads wins; otherwise ROBSCATTER_THREADS; otherwise serial.
std::size_t thread_count(const std::optional<std::size_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("ROBSCATTER_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0') return v;
  }
  return 1;
}

rs::ExecutionOptions execution(const std::optional<std::size_t>& threads) {
  rs::ExecutionOptions e;
  e.threads = thread_count(threads);
  e.parallel = e.threads != 1;
  return e;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw UsageError("cannot write " + out);
  f << j.dump(2) << '\n';
}

std::vector<std::size_t> column_range(std::size_t from, std::size_t to) {
  std::vector<std::size_t> c;
  for (std::size_t k = from; k < to; ++k) c.push_back(k);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust scatter matrices, symmetrized estimators and covariance plug-in methods"};
  app.require_subcommand(1, 1);

  std::string input, out;
  std::optional<std::size_t> threads;
  EstimatorFlags est;

  auto* scatter = app.add_subcommand("scatter", "estimate a scatter matrix");
  scatter->add_option("input", input, "CSV file, one observation per row")->required();
  est.add_to(scatter);
  scatter->add_option("--threads", threads, "worker threads for symmetrized estimators (0 = all cores)");
  scatter->add_option("--out", out, "output file (.json or .csv); default stdout JSON");

  std::string v1 = "cov", v2 = "wcov2";
  auto* ica = app.add_subcommand("ica", "two-scatter ICA unmixing matrix");
  ica->add_option("input", input, "CSV file")->required();
  ica->add_option("--v1", v1, "whitening scatter")->capture_default_str();
  ica->add_option("--v2", v2, "rotation scatter")->capture_default_str();
  ica->add_option("--threads", threads, "worker threads");
  ica->add_option("--out", out, "output JSON file");

  std::size_t responses = 1;
  EstimatorFlags reg_est;
  auto* regress = app.add_subcommand("regress", "regression slopes from a joint scatter; responses are the last columns");
  regress->add_option("input", input, "CSV file")->required();
  reg_est.add_to(regress);
  regress->add_option("--responses", responses, "number of trailing response columns")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  regress->add_option("--threads", threads, "worker threads");
  regress->add_option("--out", out, "output JSON file");

  EstimatorFlags pcor_est;
  auto* pcor = app.add_subcommand("pcor", "partial correlation of columns 1 and 2 given the rest");
  pcor->add_option("input", input, "CSV file with at least 3 columns")->required();
  pcor_est.add_to(pcor);
  pcor->add_option("--threads", threads, "worker threads");
  pcor->add_option("--out", out, "output JSON file");

  std::string figure, config_path;
  std::optional<std::size_t> reps, n_opt, p_opt;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> estimators;
  std::string source;
  bool full_scale = false;
  auto* experiment = app.add_subcommand("experiment", "run a Monte Carlo study and write CSV tables");
  experiment->add_option("--figure", figure,
                         "alpha_curve, indep_boxplot, ica_boxplot, regression_boxplot, pcor_boxplot or timing");
  experiment->add_option("--config", config_path, "JSON configuration (keys as in ExperimentConfig)");
  experiment->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  experiment->add_option("--n", n_opt, "sample size")->check(CLI::PositiveNumber);
  experiment->add_option("--p", p_opt, "dimension")->check(CLI::PositiveNumber);
  experiment->add_option("--seed", seed, "base seed");
  experiment->add_option("--estimators", estimators, "estimator names (ICA: V1:V2 pairs)")->delimiter(',');
  experiment->add_option("--source", source, "alpha_curve: chisq|two_point; ica_boxplot: skewed|symmetric");
  experiment->add_flag("--full-scale", full_scale, "published replication counts");
  experiment->add_option("--threads", threads, "replication workers (0 = all cores)");
  experiment->add_option("--out", out, "output directory")->required();

  std::vector<std::size_t> bench_n{100, 200, 400, 800, 1600, 3200}, bench_p{2, 5, 10};
  std::vector<std::string> bench_est{"sTYL", "sHUB", "TYL", "HUB"};
  std::size_t runs = 5;
  auto* bench = app.add_subcommand("bench", "median wall time per n and the log-log slope over n");
  bench->add_option("--n", bench_n, "sample sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--p", bench_p, "dimensions")->delimiter(',')->capture_default_str();
  bench->add_option("--estimators", bench_est, "sTYL, sHUB, TYL, HUB")->delimiter(',')->capture_default_str();
  bench->add_option("--runs", runs, "runs per cell (median reported)")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--seed", seed, "data seed");
  bench->add_option("--out", out, "optional output directory for CSV tables");

  app.add_subcommand("selftest", "run the exact-algebra invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (scatter->parsed()) {
      const auto t = rs::cli::read_csv_file(input);
      const auto r = rs::estimate(t.data, est.spec(t.data.p()), execution(threads));
      if (out.size() > 4 && out.ends_with(".csv")) {
        std::ofstream f(out);
        if (!f) throw UsageError("cannot write " + out);
        rs::cli::write_scatter_csv(f, r);
      } else {
        json j = rs::cli::to_json(r);
        j["n"] = t.data.n();
        j["p"] = t.data.p();
        if (!t.header.empty()) j["columns"] = t.header;
        emit(j, out);
      }
    } else if (ica->parsed()) {
      const auto t = rs::cli::read_csv_file(input);
      const auto r = rs::two_scatter_ica(t.data, rs::parse_estimator(v1), rs::parse_estimator(v2), execution(threads));
      json j{{"v1", rs::spec_tag(r.v1)},
             {"v2", rs::spec_tag(r.v2)},
             {"unmixing", rs::cli::to_json(r.unmixing)},
             {"whitener", rs::cli::to_json(r.whitener)},
             {"kurtosis_eigenvalues", r.kurtosis_eigenvalues},
             {"tie_warning", r.tie_warning}};
      if (r.tie_warning) std::cerr << "warning: eigenvalue tie, component order is arbitrary\n";
      emit(j, out);
    } else if (regress->parsed()) {
      const auto t = rs::cli::read_csv_file(input);
      const std::size_t p = t.data.p();
      if (responses >= p) throw UsageError("--responses must leave at least one regressor column");
      const auto x = t.data.select_columns(column_range(0, p - responses));
      const auto y = t.data.select_columns(column_range(p - responses, p));
      const auto r = rs::observational_regression(x, y, reg_est.spec(p), execution(threads));
      json j{{"estimator", rs::spec_tag(r.joint.spec)},
             {"slopes", rs::cli::to_json(r.slopes)},
             {"intercept", r.intercept ? json(*r.intercept) : json(nullptr)},
             {"v_xx", rs::cli::to_json(r.v_xx)},
             {"v_xy", rs::cli::to_json(r.v_xy)},
             {"v_yy", rs::cli::to_json(r.v_yy)},
             {"converged", r.joint.converged},
             {"iterations", r.joint.iterations}};
      emit(j, out);
    } else if (pcor->parsed()) {
      const auto t = rs::cli::read_csv_file(input);
      const std::size_t p = t.data.p();
      if (p < 3) throw UsageError("pcor needs at least 3 columns");
      const auto r = rs::partial_correlation(t.data.select_columns(column_range(0, 1)),
                                             t.data.select_columns(column_range(1, 2)),
                                             t.data.select_columns(column_range(2, p)), pcor_est.spec(p),
                                             execution(threads));
      json j{{"estimator", rs::spec_tag(pcor_est.spec(p))},
             {"rho", r.rho},
             {"rho_schur", r.rho_schur},
             {"precision", {{"v11", r.v11}, {"v12", r.v12}, {"v22", r.v22}}},
             {"scatter", rs::cli::to_json(r.scatter)}};
      emit(j, out);
    } else if (experiment->parsed()) {
      std::optional<rs::Figure> fig;
      if (!figure.empty()) fig = rs::parse_figure(figure);
      rs::ExperimentConfig cfg;
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw UsageError("cannot open " + config_path);
        json j;
        try {
          j = json::parse(f);
        } catch (const json::exception& e) {
          throw UsageError(config_path + ": " + e.what());
        }
        try {
          cfg = rs::cli::config_from_json(j, fig);
        } catch (const json::exception& e) {
          throw UsageError(config_path + ": " + e.what());
        }
      } else {
        if (!fig) throw UsageError("experiment needs --figure or --config");
        cfg = rs::default_config(*fig, full_scale);
      }
      if (reps) cfg.reps = *reps;
      if (n_opt) cfg.n = *n_opt;
      if (p_opt) cfg.p = *p_opt;
      if (seed) cfg.seed = rs::Seed{*seed};
      if (!estimators.empty()) cfg.estimators = estimators;
      if (!source.empty()) cfg.source = source;
      if (threads || std::getenv("ROBSCATTER_THREADS")) cfg.threads = thread_count(threads);
      cfg.out = out;
      const auto report = rs::run_experiment(cfg);
      for (const auto& path : rs::write_report(report, out)) std::cout << path.string() << '\n';
      rs::write_summary_csv(std::cout, report);
      if (!report.slopes.empty()) {
        std::cout << "estimator,p,slope\n";
        for (const auto& s : report.slopes) std::cout << s.estimator << ',' << s.p << ',' << s.slope << '\n';
      }
    } else if (bench->parsed()) {
      auto cfg = rs::default_config(rs::Figure::timing);
      cfg.n_grid = bench_n;
      cfg.p_grid = bench_p;
      cfg.estimators = bench_est;
      cfg.timing_runs = runs;
      if (seed) cfg.seed = rs::Seed{*seed};
      const auto report = rs::run_timing(cfg);
      if (!out.empty()) rs::write_report(report, out);
      std::cout << "estimator,p,n,median_seconds\n";
      for (const auto& e : cfg.estimators)
        for (std::size_t p : cfg.p_grid)
          for (std::size_t n : cfg.n_grid)
            std::cout << e << ',' << p << ',' << n << ','
                      << report.row(e + "@p" + std::to_string(p) + "@n" + std::to_string(n)).median << '\n';
      std::cout << "estimator,p,slope\n";
      for (const auto& s : report.slopes) std::cout << s.estimator << ',' << s.p << ',' << s.slope << '\n';
    } else {
      return rs::print_selftest(std::cout, rs::run_selftest()) ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const rs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == rs::ErrorKind::InvalidInput || e.kind() == rs::ErrorKind::Unsupported ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
