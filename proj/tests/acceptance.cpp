// Acceptance checks, one pass/fail line per criterion.
//   acceptance        run all
//   acceptance 4 6    run the listed ones
// Exit status is non-zero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "robscatter/robscatter.hpp"

using namespace robscatter;

namespace {

struct Verdict {
  bool passed = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      detail << " FAILED{" << what << "}";
    }
  }
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

double z(double value, double target, double se) { return std::abs(value - target) / se; }

// ---------------------------------------------------------------------------

Verdict exact_discrete_oracle() {
  Verdict v;
  std::vector<Atom> atoms;
  const double a[2] = {-0.5, 2.0}, pr[2] = {0.8, 0.2};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) atoms.push_back({Vector{a[i], a[j]}, pr[i] * pr[j]});
  const SymMatrix w = exact_wcov(atoms, 4.0);
  v.detail << "exact off-diag " << num(w(0, 1), 10) << ", diag " << num(w(0, 0), 10);
  v.check(std::abs(w(0, 1) - 4.5) < 1e-12, "off-diagonal 4.5");
  v.check(std::abs(w(0, 0) - 22.5625) < 1e-12 && std::abs(w(1, 1) - 22.5625) < 1e-12, "diagonal 22.5625");

  // sample wcov4 at n = 50000; MC SE from independent replications
  const std::size_t reps = 40;
  std::vector<double> off, diag;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto x = independent_product({Discrete{{a[0], a[1]}, {pr[0], pr[1]}}, Discrete{{a[0], a[1]}, {pr[0], pr[1]}}},
                                       50000, mix(Seed{20120901}, r));
    const SymMatrix s = wcov(x, 4.0).scatter;
    off.push_back(s(0, 1));
    diag.push_back(0.5 * (s(0, 0) + s(1, 1)));
  }
  const double se_off = stats::sample_sd(off) / std::sqrt(double(reps));
  const double se_diag = stats::sample_sd(diag) / std::sqrt(double(reps));
  const double zo = z(stats::mean(off), 4.5, se_off), zd = z(stats::mean(diag), 22.5625, se_diag);
  v.detail << "; sample n=50000 x" << reps << ": off " << num(stats::mean(off)) << " (" << num(zo, 2)
           << " SE), diag " << num(stats::mean(diag)) << " (" << num(zd, 2) << " SE)";
  v.check(zo <= 3.0, "sample off-diagonal within 3 SE");
  v.check(zd <= 3.0, "sample diagonal within 3 SE");
  return v;
}

Verdict mve_counterexample() {
  Verdict v;
  const double q[3] = {0.48, 0.45, 0.07};
  std::vector<Atom> atoms;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) atoms.push_back({Vector{double(i), double(j)}, q[i] * q[j]});
  const auto r = population_mve(atoms, 0.65);
  std::ostringstream sel;
  for (std::size_t k : r.selected) sel << "(" << atoms[k].x[0] << "," << atoms[k].x[1] << ")";
  v.detail << "atoms " << sel.str();
  v.check(sel.str() == "(0,0)(0,1)(1,0)", "selected atoms {(0,0),(1,0),(0,1)}");
  const Matrix target{{4, -2}, {-2, 4}};
  const double k = (r.shape(0, 0) + r.shape(1, 1)) / 8.0;
  const double rel = max_abs(r.shape.matrix() * (1.0 / k) - target) / 4.0;
  const double rho = pseudo_correlation(r.scatter, 0, 1);
  v.detail << ", relative shape error " << num(rel, 3) << ", rho " << num(rho, 10);
  v.check(rel < 1e-6, "shape proportional to [[4,-2],[-2,4]]");
  v.check(std::abs(rho + 0.5) <= 1e-6, "pseudo-correlation -0.5");
  return v;
}

Verdict alpha_curve() {
  Verdict v;
  ExperimentConfig c = default_config(Figure::alpha_curve);
  c.alphas = {-2.0, 0.0, 2.0};
  c.p_grid = {2};
  c.n = 5000;
  c.reps = 200;
  const auto r = run_experiment(c);
  for (double a : c.alphas) {
    const auto& s = r.row("wcov" + num(a) + "@p2");
    const double zz = s.mean / s.mean_se;
    v.detail << "alpha=" << a << ": mean " << num(s.mean, 3) << " (" << num(zz, 3) << " SE); ";
    if (a == -2.0) v.check(std::abs(zz) > 5.0, "alpha=-2 displaced > 5 SE");
    else v.check(std::abs(zz) <= 3.0, "alpha=" + num(a) + " within 3 SE");
    v.check(s.n_fail == 0, "no failed fits at alpha=" + num(a));
  }
  return v;
}

// Medians of `near` within 3 robust MC SEs of target, medians of `far` more than 5 away.
Verdict boxplot(Figure f, double target, const std::vector<std::string>& near, const std::vector<std::string>& far) {
  Verdict v;
  const ExperimentConfig c = default_config(f);
  const auto r = run_experiment(c);
  v.detail << "n=" << c.n << " reps=" << c.reps << ":";
  for (const auto& s : r.summary) {
    const double zz = z(s.median, target, s.mc_se);
    v.detail << " " << s.estimator << " " << num(s.median, 3) << " (" << num(zz, 3) << " SE"
             << (s.n_fail ? ", " + std::to_string(s.n_fail) + " failed" : "") << ")";
  }
  for (const auto& e : near) {
    const auto& s = r.row(e);
    v.check(s.n_ok > 0 && z(s.median, target, s.mc_se) <= 3.0, e + " within 3 SE");
  }
  for (const auto& e : far) {
    const auto& s = r.row(e);
    v.check(s.n_ok > 0 && z(s.median, target, s.mc_se) > 5.0, e + " displaced > 5 SE");
  }
  return v;
}

Verdict independence() {
  return boxplot(Figure::indep_boxplot, 0.0, {"cov", "sCAU", "sHUB", "sTYL"}, {"CAU", "HUB", "TYL", "MVE", "MCD"});
}

Verdict ica() {
  Verdict v;
  const ExperimentConfig c = default_config(Figure::ica_boxplot);
  const auto r = run_experiment(c);
  v.detail << "median MD:";
  for (const auto& s : r.summary) v.detail << " " << s.estimator << " " << num(s.median, 3);
  const double worst_good = std::max({r.row("cov:wcov2").median, r.row("sCAU:cov").median, r.row("sTYL:sHUB").median});
  const double best_bad = std::min(r.row("CAU:cov").median, r.row("TYL:HUB").median);
  for (const auto& s : r.summary) v.check(s.n_fail == 0, "no failed fits for " + s.estimator);
  v.check(worst_good <= 0.5 * best_bad, "symmetrized/FOBI pairs at most half the non-symmetrized medians");
  return v;
}

Verdict regression() {
  return boxplot(Figure::regression_boxplot, 5.0, {"sCAU", "sHUB", "sTYL"}, {"CAU", "HUB", "TYL", "MVE", "MCD"});
}

Verdict pcor() {
  return boxplot(Figure::pcor_boxplot, 0.0, {"sCAU", "sHUB", "sTYL"}, {"CAU", "HUB", "TYL", "MVE", "MCD"});
}

Verdict timing() {
  Verdict v;
  ExperimentConfig c = default_config(Figure::timing);
  c.estimators = {"sTYL", "sHUB"};
  c.p_grid = {2, 5};
  c.timing_runs = 3;
  const auto r = run_experiment(c);
  v.check(r.failures.empty(), "all timing fits succeed");
  for (const auto& s : r.slopes) {
    v.detail << s.estimator << "@p" << s.p << " slope " << num(s.slope, 3) << "; ";
    v.check(s.slope >= 1.7 && s.slope <= 2.3, s.estimator + "@p" + std::to_string(s.p) + " slope in [1.7, 2.3]");
  }
  return v;
}

Verdict selftest() {
  Verdict v;
  const auto results = run_selftest();
  for (const auto& t : results) {
    v.detail << t.tag << "=" << (t.passed ? "ok" : "FAIL") << "(" << num(t.max_error, 2) << ") ";
    v.check(t.passed, t.tag);
  }
  return v;
}

Verdict small_oracles() {
  Verdict v;
  // MCD: C-step heuristic vs all h-subsets
  double worst_mcd = 0.0;
  for (auto [n, h, seed] : {std::tuple{16u, 9u, 1u}, std::tuple{20u, 11u, 2u}, std::tuple{18u, 12u, 3u}}) {
    Matrix m = independent_product({StandardNormal{}, ChisqStd{1.0}}, n, Seed{seed}).values();
    for (std::size_t i = 0; i < n / 4; ++i) m(i, 0) += 5.0;
    const DataMatrix x(std::move(m));
    SubsetSpec s;
    s.h = h;
    const double got = log_det(mcd(x, s).scatter) - 2.0 * std::log(detail::mcd_consistency(h, n, 2));
    double best = std::numeric_limits<double>::infinity();
    detail::for_each_subset(n, h, [&](std::span<const std::size_t> idx) {
      if (auto ld = subset_log_det(x, idx)) best = std::min(best, *ld);
    });
    worst_mcd = std::max(worst_mcd, std::abs(std::exp(got - best) - 1.0));
  }
  // MVE: exact small-n search vs Khachiyan on every h-subset
  double worst_mve = 0.0;
  for (auto [n, h, seed] : {std::tuple{14u, 8u, 4u}, std::tuple{16u, 9u, 5u}}) {
    Matrix m = independent_product({StandardNormal{}, ChisqStd{2.0}}, n, Seed{seed}).values();
    for (std::size_t i = 0; i < n / 4; ++i) m(i, 1) += 6.0;
    const DataMatrix x(std::move(m));
    SubsetSpec s;
    s.h = h;
    const double got = mve_fit(x, s).raw.log_volume;
    double best = std::numeric_limits<double>::infinity();
    detail::for_each_subset(n, h, [&](std::span<const std::size_t> idx) {
      if (auto e = min_volume_ellipsoid(detail::rows_of(x, idx))) best = std::min(best, e->log_volume);
    });
    worst_mve = std::max(worst_mve, std::abs(std::exp(got - best) - 1.0));
  }
  // symmetrized vs materialized differences
  double worst_sym = 0.0;
  for (std::size_t n : {20u, 45u, 60u}) {
    const DataMatrix x = independent_product({ChisqStd{1.0}, LognormalStd{1.0}, UniformStd{}}, n, Seed{n});
    const DataMatrix diffs(PairDifferenceView(x).materialize());
    for (const char* name : {"sCAU", "sHUB", "sTYL", "wcov2_sym", "cov_sym"}) {
      ScatterSpec sym = parse_estimator(name);
      sym.irls.tol = 1e-13;
      sym.irls.max_iter = 20000;
      ScatterSpec inner = sym;
      inner.symmetrized = false;
      inner.fixed_location = Vector(3, 0.0);
      const SymMatrix a = estimate(x, sym).scatter, b = estimate(diffs, inner).scatter;
      worst_sym = std::max(worst_sym, max_abs(a.matrix() - b.matrix()) / max_abs(b));
    }
  }
  v.detail << "MCD det rel err " << num(worst_mcd, 3) << ", MVE volume rel err " << num(worst_mve, 3)
           << ", symmetrized vs materialized " << num(worst_sym, 3);
  v.check(worst_mcd <= 1e-6, "MCD matches exhaustive search");
  v.check(worst_mve <= 1e-6, "MVE matches exhaustive search");
  v.check(worst_sym <= 1e-10, "symmetrized matches materialized differences");
  return v;
}

struct Criterion {
  const char* title;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> c{
      {"exact discrete wcov4 oracle and sample agreement", exact_discrete_oracle},
      {"population MVE on the trinomial product law", mve_counterexample},
      {"wcov alpha curve under independence", alpha_curve},
      {"independence: pseudo-correlation medians", independence},
      {"ICA: median MD index of scatter pairs", ica},
      {"observational regression slopes", regression},
      {"plug-in partial correlation", pcor},
      {"symmetrized estimator runtime order in n", timing},
      {"exact-algebra self-test suite", selftest},
      {"small-instance exhaustive and materialized oracles", small_oracles},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k < 1 || k > static_cast<int>(criteria().size())) {
      std::cerr << "unknown criterion " << argv[i] << '\n';
      return 2;
    }
    which.push_back(static_cast<std::size_t>(k));
  }
  if (which.empty())
    for (std::size_t k = 1; k <= criteria().size(); ++k) which.push_back(k);

  bool all = true;
  for (std::size_t k : which) {
    const auto& c = criteria()[k - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.passed = false;
      v.detail << " exception: " << e.what();
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.passed ? "PASS" : "FAIL") << "  criterion " << k << ": " << c.title << " [" << num(sec, 3)
              << " s] -- " << v.detail.str() << std::endl;
    all = all && v.passed;
  }
  return all ? 0 : 1;
}
