#pragma once

// Monte Carlo drivers for the independence, ICA, regression, partial
// correlation and timing studies. Every replication r draws its data from
// mix(seed, r), so reports do not depend on scheduling or thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/estimator.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/parallel.hpp"
#include "robscatter/plugin.hpp"
#include "robscatter/randgen.hpp"
#include "robscatter/stats.hpp"

namespace robscatter {

enum class Figure { alpha_curve, indep_boxplot, ica_boxplot, regression_boxplot, pcor_boxplot, timing };

inline std::string to_string(Figure f) {
  switch (f) {
    case Figure::alpha_curve: return "alpha_curve";
    case Figure::indep_boxplot: return "indep_boxplot";
    case Figure::ica_boxplot: return "ica_boxplot";
    case Figure::regression_boxplot: return "regression_boxplot";
    case Figure::pcor_boxplot: return "pcor_boxplot";
    case Figure::timing: return "timing";
  }
  return "?";
}

inline Figure parse_figure(const std::string& name) {
  for (Figure f : {Figure::alpha_curve, Figure::indep_boxplot, Figure::ica_boxplot, Figure::regression_boxplot,
                   Figure::pcor_boxplot, Figure::timing})
    if (to_string(f) == name) return f;
  fail(ErrorKind::InvalidInput, "unknown figure: " + name);
}

/// Estimators are given by name (see parse_estimator); ICA entries are pairs "V1:V2".
struct ExperimentConfig {
  Figure figure = Figure::indep_boxplot;
  std::size_t n = 1000;
  std::size_t p = 5;
  std::size_t reps = 200;
  Seed seed{20120901};
  std::vector<std::string> estimators;
  std::string out;          // output directory; empty: no files
  std::size_t threads = 1;  // replication workers; 0 = hardware
  // alpha_curve
  std::vector<double> alphas;
  std::vector<std::size_t> p_grid;  // alpha_curve and timing
  std::string source;               // alpha_curve: chisq | two_point; ica: skewed | symmetric
  // timing
  std::vector<std::size_t> n_grid;
  std::size_t timing_runs = 5;
};

inline const std::vector<std::string>& nine_estimators() {
  static const std::vector<std::string> v{"cov", "CAU", "sCAU", "HUB", "sHUB", "TYL", "sTYL", "MVE", "MCD"};
  return v;
}

/// Desk-scale defaults for a figure; `full_scale` restores the published replication counts.
inline ExperimentConfig default_config(Figure f, bool full_scale = false) {
  ExperimentConfig c;
  c.figure = f;
  switch (f) {
    case Figure::alpha_curve:
      c.n = 5000;
      c.p = 2;
      c.reps = full_scale ? 2000 : 200;
      for (int k = -6; k <= 12; ++k) c.alphas.push_back(0.5 * k);
      c.p_grid = {2, 5, 10};
      c.source = "chisq";
      c.estimators = {"wcov"};
      break;
    case Figure::indep_boxplot:
      c.n = 1000;
      c.p = 5;
      c.reps = full_scale ? 2000 : 200;
      c.estimators = nine_estimators();
      break;
    case Figure::ica_boxplot:
      c.n = 1000;
      c.p = 2;
      c.reps = full_scale ? 1000 : 100;
      c.source = "skewed";
      c.estimators = {"cov:wcov2", "CAU:cov", "sCAU:cov", "TYL:HUB", "sTYL:sHUB"};
      break;
    case Figure::regression_boxplot:
      c.n = 2000;
      c.p = 2;
      c.reps = full_scale ? 1000 : 100;
      c.estimators = nine_estimators();
      break;
    case Figure::pcor_boxplot:
      c.n = 2000;
      c.p = 3;
      c.reps = full_scale ? 1000 : 100;
      c.estimators = nine_estimators();
      break;
    case Figure::timing:
      c.reps = 1;
      c.n_grid = {100, 200, 400, 800, 1600, 3200};
      c.p_grid = {2, 5, 10};
      c.estimators = {"sTYL", "sHUB", "TYL", "HUB"};
      break;
  }
  return c;
}

struct ExperimentRecord {
  std::string estimator;  // label, may carry grid coordinates, e.g. "wcov2@p5"
  std::size_t rep = 0;
  double statistic = 0.0;
  bool converged = true;
  double seconds = 0.0;
};

struct ExperimentFailure {
  std::string estimator;
  std::size_t rep = 0;
  std::string kind;
  std::string message;
};

struct SummaryRow {
  std::string estimator;
  double median = 0.0, q1 = 0.0, q3 = 0.0;
  double mc_se = 0.0;  // robust standard error of the median
  double mean = 0.0, mean_se = 0.0;
  std::size_t n_ok = 0, n_fail = 0;
};

struct SlopeRow {
  std::string estimator;
  std::size_t p = 0;
  double slope = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ExperimentRecord> records;
  std::vector<ExperimentFailure> failures;
  std::vector<SummaryRow> summary;
  std::vector<SlopeRow> slopes;  // timing only

  const SummaryRow& row(const std::string& label) const {
    for (const auto& r : summary)
      if (r.estimator == label) return r;
    fail(ErrorKind::InvalidInput, "no summary row " + label);
  }
};

/// Robust standard error of a median: sqrt(pi/2) * (IQR/1.349) / sqrt(n).
inline double median_mc_se(double q1, double q3, std::size_t n) {
  return 1.2533 * ((q3 - q1) / 1.349) / std::sqrt(static_cast<double>(n));
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// One estimator outcome inside a replication.
struct Outcome {
  std::string label;
  std::optional<ExperimentRecord> record;
  std::optional<ExperimentFailure> failure;
};

template <class F>
Outcome attempt(const std::string& label, std::size_t rep, F&& stat) {
  Outcome o;
  o.label = label;
  const auto t0 = Clock::now();
  try {
    const double v = stat();
    o.record = ExperimentRecord{label, rep, v, true, seconds_since(t0)};
  } catch (const Error& e) {
    o.failure = ExperimentFailure{label, rep, std::string(to_string(e.kind())), e.what()};
  }
  return o;
}

inline std::vector<SummaryRow> summarize(const std::vector<std::string>& labels,
                                         const std::vector<ExperimentRecord>& records,
                                         const std::vector<ExperimentFailure>& failures) {
  std::vector<SummaryRow> out;
  for (const auto& label : labels) {
    SummaryRow s;
    s.estimator = label;
    std::vector<double> xs;
    for (const auto& r : records)
      if (r.estimator == label) xs.push_back(r.statistic);
    for (const auto& f : failures)
      if (f.estimator == label) ++s.n_fail;
    s.n_ok = xs.size();
    if (!xs.empty()) {
      s.median = stats::quantile(xs, 0.5);
      s.q1 = stats::quantile(xs, 0.25);
      s.q3 = stats::quantile(xs, 0.75);
      s.mc_se = median_mc_se(s.q1, s.q3, xs.size());
      s.mean = stats::mean(xs);
      s.mean_se = stats::sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
    } else {
      s.median = s.q1 = s.q3 = s.mc_se = s.mean = s.mean_se = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(s);
  }
  return out;
}

/// Runs reps replications, each returning its outcomes in a fixed label order.
template <class Rep>
ExperimentReport run_replications(const ExperimentConfig& cfg, const std::vector<std::string>& labels, Rep&& rep) {
  require(cfg.reps >= 1, "reps must be at least 1");
  std::vector<std::vector<Outcome>> slots(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) { slots[r] = rep(r, mix(cfg.seed, r)); });
  ExperimentReport report;
  report.config = cfg;
  for (const auto& slot : slots)
    for (const auto& o : slot) {
      if (o.record) report.records.push_back(*o.record);
      if (o.failure) report.failures.push_back(*o.failure);
    }
  report.summary = summarize(labels, report.records, report.failures);
  return report;
}

inline void check_common(const ExperimentConfig& cfg, Figure expected) {
  require(cfg.figure == expected, "configuration is for figure " + to_string(cfg.figure) + ", not " +
                                      to_string(expected));
  require(cfg.reps >= 1, "reps must be at least 1");
  require(!cfg.estimators.empty(), "estimator list must not be empty");
}

inline std::string alpha_label(double a, std::size_t p) {
  std::ostringstream os;
  os << "wcov" << a << "@p" << p;
  return os.str();
}

}  // namespace detail

/// Mean pseudo-correlation rho_12 of wcov_alpha over an alpha grid and a p grid.
inline ExperimentReport run_alpha_curve(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::alpha_curve);
  require(!cfg.alphas.empty(), "alpha grid must not be empty");
  const std::vector<std::size_t> ps = cfg.p_grid.empty() ? std::vector<std::size_t>{cfg.p} : cfg.p_grid;
  for (std::size_t p : ps) require(p >= 2, "alpha curve needs p >= 2");
  DistributionSpec column;
  if (cfg.source.empty() || cfg.source == "chisq") column = ChisqStd{1.0};
  else if (cfg.source == "two_point") column = Discrete{{-0.5, 2.0}, {0.8, 0.2}};
  else fail(ErrorKind::InvalidInput, "alpha curve source must be chisq or two_point");

  std::vector<std::string> labels;
  for (std::size_t p : ps)
    for (double a : cfg.alphas) labels.push_back(detail::alpha_label(a, p));
  return detail::run_replications(cfg, labels, [&](std::size_t r, Seed s) {
    std::vector<detail::Outcome> out;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const DataMatrix x = independent_product(std::vector<DistributionSpec>(ps[k], column), cfg.n, mix(s, k));
      for (double a : cfg.alphas)
        out.push_back(detail::attempt(detail::alpha_label(a, ps[k]), r,
                                      [&] { return pseudo_correlation(wcov(x, a).scatter, 0, 1); }));
    }
    return out;
  });
}

/// rho_12 of each estimator on p independent standardized chi2_1 columns.
inline ExperimentReport run_indep_boxplot(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::indep_boxplot);
  require(cfg.p >= 2, "independence study needs p >= 2");
  std::vector<ScatterSpec> specs;
  for (const auto& e : cfg.estimators) specs.push_back(parse_estimator(e));
  return detail::run_replications(cfg, cfg.estimators, [&](std::size_t r, Seed s) {
    const DataMatrix x = independent_product(std::vector<DistributionSpec>(cfg.p, ChisqStd{1.0}), cfg.n, s);
    std::vector<detail::Outcome> out;
    for (std::size_t k = 0; k < specs.size(); ++k)
      out.push_back(detail::attempt(cfg.estimators[k], r,
                                    [&] { return pseudo_correlation(estimate(x, specs[k]).scatter, 0, 1); }));
    return out;
  });
}

inline std::pair<ScatterSpec, ScatterSpec> parse_pair(const std::string& name) {
  const auto colon = name.find(':');
  require(colon != std::string::npos, "ICA estimator entries are pairs V1:V2, got " + name);
  return {parse_estimator(name.substr(0, colon)), parse_estimator(name.substr(colon + 1))};
}

/// MD index of two-scatter ICA with A = I; sources chi2_1, chi2_2 (skewed) or uniforms (symmetric).
inline ExperimentReport run_ica_boxplot(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::ica_boxplot);
  require(cfg.p >= 2 && cfg.p <= kMdIndexMaxDim, "ICA study needs 2 <= p <= 8");
  std::vector<DistributionSpec> sources;
  if (cfg.source.empty() || cfg.source == "skewed") {
    for (std::size_t j = 0; j < cfg.p; ++j) sources.push_back(ChisqStd{static_cast<double>(j + 1)});
  } else if (cfg.source == "symmetric") {
    sources.assign(cfg.p, UniformStd{});
  } else {
    fail(ErrorKind::InvalidInput, "ICA source must be skewed or symmetric");
  }
  std::vector<std::pair<ScatterSpec, ScatterSpec>> pairs;
  for (const auto& e : cfg.estimators) pairs.push_back(parse_pair(e));
  return detail::run_replications(cfg, cfg.estimators, [&](std::size_t r, Seed s) {
    const DataMatrix x = independent_product(sources, cfg.n, s);
    std::vector<detail::Outcome> out;
    for (std::size_t k = 0; k < pairs.size(); ++k)
      out.push_back(detail::attempt(cfg.estimators[k], r, [&] {
        return md_index(two_scatter_ica(x, pairs[k].first, pairs[k].second).unmixing);
      }));
    return out;
  });
}

/// Slope of y = 5x + eps, x standardized lognormal, eps standardized exponential.
inline ExperimentReport run_regression_boxplot(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::regression_boxplot);
  std::vector<ScatterSpec> specs;
  for (const auto& e : cfg.estimators) specs.push_back(parse_estimator(e));
  return detail::run_replications(cfg, cfg.estimators, [&](std::size_t r, Seed s) {
    const DataMatrix x = sample(LognormalStd{1.0}, cfg.n, mix(s, 0));
    const DataMatrix eps = sample(ExponentialStd{}, cfg.n, mix(s, 1));
    Matrix y(cfg.n, 1);
    for (std::size_t i = 0; i < cfg.n; ++i) y(i, 0) = 5.0 * x(i, 0) + eps(i, 0);
    const DataMatrix yd(std::move(y));
    std::vector<detail::Outcome> out;
    for (std::size_t k = 0; k < specs.size(); ++k)
      out.push_back(detail::attempt(cfg.estimators[k], r,
                                    [&] { return observational_regression(x, yd, specs[k]).slopes(0, 0); }));
    return out;
  });
}

/// Plug-in partial correlation of u = 4x + eps1, v = 5x + eps2 given x;
/// x normal, eps1 standardized lognormal, eps2 standardized chi2_1. Truth: 0.
inline ExperimentReport run_pcor_boxplot(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::pcor_boxplot);
  std::vector<ScatterSpec> specs;
  for (const auto& e : cfg.estimators) specs.push_back(parse_estimator(e));
  return detail::run_replications(cfg, cfg.estimators, [&](std::size_t r, Seed s) {
    const DataMatrix x = sample(StandardNormal{}, cfg.n, mix(s, 0));
    const DataMatrix e1 = sample(LognormalStd{1.0}, cfg.n, mix(s, 1));
    const DataMatrix e2 = sample(ChisqStd{1.0}, cfg.n, mix(s, 2));
    Matrix u(cfg.n, 1), v(cfg.n, 1);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      u(i, 0) = 4.0 * x(i, 0) + e1(i, 0);
      v(i, 0) = 5.0 * x(i, 0) + e2(i, 0);
    }
    const DataMatrix ud(std::move(u)), vd(std::move(v));
    std::vector<detail::Outcome> out;
    for (std::size_t k = 0; k < specs.size(); ++k)
      out.push_back(detail::attempt(cfg.estimators[k], r,
                                    [&] { return partial_correlation(ud, vd, x, specs[k]).rho; }));
    return out;
  });
}

/// Random N_p(0, Sigma) sample with Sigma = B B^T / p + I, B standard normal.
inline DataMatrix timing_sample(std::size_t n, std::size_t p, Seed seed) {
  Rng rng(mix(seed, 0xC0FFEE));
  Matrix b(p, p);
  for (double& v : b.data()) v = rng.normal();
  SymMatrix sigma((b * b.transpose()) * (1.0 / static_cast<double>(p)) + Matrix::identity(p));
  return sample(MultivariateNormal{Vector(p, 0.0), sigma}, n, seed);
}

/// Median-of-runs wall time per (estimator, p, n) and the log-log slope over n.
/// Runs serially regardless of cfg.threads so timings do not interfere.
inline ExperimentReport run_timing(const ExperimentConfig& cfg) {
  detail::check_common(cfg, Figure::timing);
  require(!cfg.n_grid.empty() && !cfg.p_grid.empty(), "timing needs n and p grids");
  require(cfg.timing_runs >= 1, "timing_runs must be at least 1");
  for (const auto& e : cfg.estimators) {
    const ScatterSpec s = parse_estimator(e);
    require(s.family == Family::tyler || s.family == Family::m_huber,
            "timing supports sTYL, sHUB, TYL and HUB, got " + e);
  }
  ExperimentReport report;
  report.config = cfg;
  std::vector<std::string> labels;
  std::map<std::string, std::pair<std::string, std::size_t>> label_key;
  for (const auto& e : cfg.estimators) {
    const ScatterSpec spec = parse_estimator(e);
    for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi) {
      const std::size_t p = cfg.p_grid[pi];
      for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
        const std::size_t n = cfg.n_grid[ni];
        const std::string label = e + "@p" + std::to_string(p) + "@n" + std::to_string(n);
        labels.push_back(label);
        const DataMatrix x = timing_sample(n, p, mix(cfg.seed, pi * 1000 + ni));
        for (std::size_t run = 0; run < cfg.timing_runs; ++run) {
          const auto t0 = detail::Clock::now();
          try {
            const auto r = estimate(x, spec);
            const double sec = detail::seconds_since(t0);
            report.records.push_back({label, run, sec, r.converged, sec});
          } catch (const Error& err) {
            report.failures.push_back({label, run, std::string(to_string(err.kind())), err.what()});
          }
        }
      }
    }
  }
  report.summary = detail::summarize(labels, report.records, report.failures);
  for (const auto& e : cfg.estimators)
    for (std::size_t p : cfg.p_grid) {
      std::vector<double> ln, lt;
      for (std::size_t n : cfg.n_grid) {
        const auto& s = report.row(e + "@p" + std::to_string(p) + "@n" + std::to_string(n));
        if (s.n_ok == 0 || !(s.median > 0.0)) continue;
        ln.push_back(std::log(static_cast<double>(n)));
        lt.push_back(std::log(s.median));
      }
      report.slopes.push_back({e, p, ln.size() >= 2 ? stats::ols_slope(ln, lt)
                                                    : std::numeric_limits<double>::quiet_NaN()});
    }
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.figure) {
    case Figure::alpha_curve: return run_alpha_curve(cfg);
    case Figure::indep_boxplot: return run_indep_boxplot(cfg);
    case Figure::ica_boxplot: return run_ica_boxplot(cfg);
    case Figure::regression_boxplot: return run_regression_boxplot(cfg);
    case Figure::pcor_boxplot: return run_pcor_boxplot(cfg);
    case Figure::timing: return run_timing(cfg);
  }
  fail(ErrorKind::InvalidInput, "unknown figure");
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  f.imbue(std::locale::classic());
  return f;
}

}  // namespace detail

/// With `with_seconds` false the timing column is omitted, which makes the raw
/// table a pure function of the configuration.
inline void write_raw_csv(std::ostream& os, const ExperimentReport& r, bool with_seconds = true) {
  os << "figure,estimator,rep,statistic,converged" << (with_seconds ? ",seconds" : "") << "\n";
  const std::string fig = to_string(r.config.figure);
  for (const auto& rec : r.records) {
    os << fig << ',' << rec.estimator << ',' << rec.rep << ',' << detail::fmt(rec.statistic) << ','
       << (rec.converged ? 1 : 0);
    if (with_seconds) os << ',' << detail::fmt(rec.seconds);
    os << '\n';
  }
}

inline void write_summary_csv(std::ostream& os, const ExperimentReport& r) {
  os << "estimator,median,q1,q3,mc_se,n_fail,mean,mean_se,n_ok\n";
  for (const auto& s : r.summary)
    os << s.estimator << ',' << detail::fmt(s.median) << ',' << detail::fmt(s.q1) << ',' << detail::fmt(s.q3) << ','
       << detail::fmt(s.mc_se) << ',' << s.n_fail << ',' << detail::fmt(s.mean) << ',' << detail::fmt(s.mean_se)
       << ',' << s.n_ok << '\n';
}

/// Writes <figure>_raw.csv, <figure>_summary.csv, and for timing <figure>_slopes.csv,
/// plus <figure>_failures.csv when any fit failed. Returns the written paths.
inline std::vector<std::filesystem::path> write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string fig = to_string(r.config.figure);
  std::vector<std::filesystem::path> paths{dir / (fig + "_raw.csv"), dir / (fig + "_summary.csv")};
  {
    auto f = detail::open_csv(paths[0]);
    write_raw_csv(f, r);
  }
  {
    auto f = detail::open_csv(paths[1]);
    write_summary_csv(f, r);
  }
  if (r.config.figure == Figure::timing) {
    paths.push_back(dir / (fig + "_slopes.csv"));
    auto f = detail::open_csv(paths.back());
    f << "estimator,p,slope\n";
    for (const auto& s : r.slopes) f << s.estimator << ',' << s.p << ',' << detail::fmt(s.slope) << '\n';
  }
  if (!r.failures.empty()) {
    paths.push_back(dir / (fig + "_failures.csv"));
    auto f = detail::open_csv(paths.back());
    f << "estimator,rep,kind,message\n";
    for (const auto& e : r.failures) {
      std::string msg = e.message;
      std::replace(msg.begin(), msg.end(), ',', ';');
      f << e.estimator << ',' << e.rep << ',' << e.kind << ',' << msg << '\n';
    }
  }
  return paths;
}

}  // namespace robscatter
