#pragma once

// Exact-algebra invariant suite. Each check builds a finite sample whose
// structure forces an identity, runs the estimators, and compares the
// worst deviation against a tolerance. ROBSCATTER_SELFTEST_TOL_SCALE
// multiplies every tolerance (a negative value makes every check fail).

#include <cmath>
#include <cstdlib>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "robscatter/estimator.hpp"
#include "robscatter/experiments.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/plugin.hpp"
#include "robscatter/randgen.hpp"

namespace robscatter {

struct SelfTestResult {
  std::string tag;
  std::string description;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;  // worst case, or the exception message
};

inline double selftest_tolerance_scale() {
  if (const char* env = std::getenv("ROBSCATTER_SELFTEST_TOL_SCALE")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && std::isfinite(v)) return v;
  }
  return 1.0;
}

namespace selftest_detail {

/// Tight IRLS settings so fixed points are resolved well below the check tolerances.
inline ScatterSpec tight(ScatterSpec s) {
  s.irls.tol = 1e-13;
  s.irls.max_iter = 20000;
  return s;
}

inline std::vector<ScatterSpec> specs_of(const std::vector<std::string>& names) {
  std::vector<ScatterSpec> out;
  for (const auto& n : names) out.push_back(tight(parse_estimator(n)));
  return out;
}

inline DataMatrix skewed_sample(std::size_t n, std::size_t p, std::uint64_t seed) {
  return independent_product(std::vector<DistributionSpec>(p, ChisqStd{1.0}), n, Seed{seed});
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(Seed{seed});
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

/// Well-conditioned random square matrix: I + 0.4 G.
inline Matrix random_nonsingular(std::size_t p, std::uint64_t seed) {
  return Matrix::identity(p) + 0.4 * random_matrix(p, p, seed);
}

struct Worst {
  double err = 0.0;
  std::string where;
  void update(double e, const std::string& w) {
    if (!(e <= err)) {  // also catches NaN
      err = e;
      where = w;
    }
  }
};

inline double rel_diff(const Matrix& a, const Matrix& b) {
  return max_abs(a - b) / std::max(1.0, max_abs(b));
}

inline bool is_shape(const ScatterSpec& s) { return effective_normalization(s) != Normalization::none; }

/// Every row sign pattern applied to every base row: the empirical law is invariant
/// under each coordinate sign change.
inline DataMatrix sign_augment(const DataMatrix& base) {
  const std::size_t m = base.n(), p = base.p(), patterns = std::size_t{1} << p;
  Matrix out(m * patterns, p);
  for (std::size_t s = 0; s < patterns; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p; ++j) out(s * m + i, j) = ((s >> j) & 1 ? -1.0 : 1.0) * base(i, j);
  return DataMatrix(std::move(out));
}

/// All pairs (x_i, y_k): the empirical law of the two blocks is a product law.
inline DataMatrix product_augment(const DataMatrix& x, const DataMatrix& y) {
  Matrix out(x.n() * y.n(), x.p() + y.p());
  std::size_t r = 0;
  for (std::size_t i = 0; i < x.n(); ++i)
    for (std::size_t k = 0; k < y.n(); ++k, ++r) {
      for (std::size_t j = 0; j < x.p(); ++j) out(r, j) = x(i, j);
      for (std::size_t j = 0; j < y.p(); ++j) out(r, x.p() + j) = y(k, j);
    }
  return DataMatrix(std::move(out));
}

}  // namespace selftest_detail

inline std::vector<SelfTestResult> run_selftest() {
  using namespace selftest_detail;
  const double scale = selftest_tolerance_scale();
  std::vector<SelfTestResult> results;

  auto check = [&](std::string tag, std::string description, double tol, const std::function<Worst()>& body) {
    SelfTestResult r;
    r.tag = std::move(tag);
    r.description = std::move(description);
    r.tolerance = tol * scale;
    try {
      const Worst w = body();
      r.max_error = w.err;
      r.detail = w.where;
      r.passed = w.err <= r.tolerance;
    } catch (const std::exception& e) {
      r.passed = false;
      r.max_error = std::numeric_limits<double>::quiet_NaN();
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  };

  check("sign-flip-diagonality",
        "scatters of a sign-symmetric empirical law are diagonal (max |pseudo-correlation|)", 1e-10, [] {
          Worst w;
          const DataMatrix x = sign_augment(skewed_sample(8, 3, 11));
          for (const auto& name : {"cov", "wcov2", "wcov-1", "CAU", "HUB", "TYL", "sCAU", "sHUB", "sTYL"}) {
            const SymMatrix v = estimate(x, tight(parse_estimator(name))).scatter;
            for (std::size_t j = 0; j < v.dim(); ++j)
              for (std::size_t k = j + 1; k < v.dim(); ++k) w.update(std::abs(pseudo_correlation(v, j, k)), name);
          }
          return w;
        });

  check("block-diagonality",
        "symmetrized scatters of a product of two blocks are block diagonal (max off-block |pseudo-correlation|)",
        1e-10, [] {
          Worst w;
          const DataMatrix z = product_augment(skewed_sample(7, 2, 21), skewed_sample(6, 2, 22));
          for (const auto& name : {"cov", "wcov2", "cov_sym", "sCAU", "sHUB", "sTYL"}) {
            ScatterSpec s = name == std::string("cov_sym") ? ScatterSpec::of(Family::cov, true) : parse_estimator(name);
            const SymMatrix v = estimate(z, tight(s)).scatter;
            for (std::size_t j = 0; j < 2; ++j)
              for (std::size_t k = 2; k < 4; ++k) w.update(std::abs(pseudo_correlation(v, j, k)), name);
          }
          return w;
        });

  check("block-inverse-precision", "precision entry v^12 vanishes for V = [[I,A],[0,I]] diag(D,M) [[I,0],[A',I]]",
        1e-12, [] {
          Worst w;
          for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const std::size_t p = 3 + trial % 4;
            Rng rng(Seed{100 + trial});
            Matrix upper = Matrix::identity(p);
            for (std::size_t i = 0; i < 2; ++i)
              for (std::size_t j = 2; j < p; ++j) upper(i, j) = rng.normal();
            Matrix core(p, p);
            core(0, 0) = 0.5 + rng.uniform() * 3.0;
            core(1, 1) = 0.5 + rng.uniform() * 3.0;
            const Matrix g = random_matrix(p - 2, p - 2, 200 + trial);
            const Matrix m = g * g.transpose() + Matrix::identity(p - 2);
            for (std::size_t i = 2; i < p; ++i)
              for (std::size_t j = 2; j < p; ++j) core(i, j) = m(i - 2, j - 2);
            const SymMatrix v(upper * core * upper.transpose());
            const SymMatrix prec = invert(v);
            w.update(std::abs(prec(0, 1)) / std::sqrt(prec(0, 0) * prec(1, 1)), "p=" + std::to_string(p));
            const auto pc = partial_correlation_from_scatter(v);
            w.update(std::abs(pc.rho), "rho p=" + std::to_string(p));
          }
          return w;
        });

  check("regression-equivariance",
        "B(Y + XC, X) = B + C, B(YC, X) = B C, B(Y, XA) = A^-1 B for every estimator (relative)", 1e-10, [] {
          Worst w;
          const DataMatrix x = skewed_sample(50, 2, 31), y = skewed_sample(50, 2, 32);
          const Matrix c = random_matrix(2, 2, 33);
          const Matrix a = random_nonsingular(2, 34);
          const Matrix yc_shift = y.values() + x.values() * c;
          const Matrix yc = y.values() * c;
          const Matrix xa = x.values() * a;
          for (const auto& name : nine_estimators()) {
            const ScatterSpec s = tight(parse_estimator(name));
            const Matrix b = observational_regression(x, y, s).slopes;
            w.update(rel_diff(observational_regression(x, DataMatrix(yc_shift), s).slopes, b + c), name + " shift");
            w.update(rel_diff(observational_regression(x, DataMatrix(yc), s).slopes, b * c), name + " scale");
            w.update(rel_diff(observational_regression(DataMatrix(xa), y, s).slopes, invert(SymMatrix(a.transpose() * a)).matrix() * a.transpose() * b),
                     name + " design");
          }
          return w;
        });

  check("affine-equivariance",
        "V(Ax + b) = A V(x) A' (up to scale for shapes) and t(Ax + b) = A t(x) + b (relative)", 1e-8, [] {
          Worst w;
          const DataMatrix x = skewed_sample(40, 3, 41);
          const Matrix a = random_nonsingular(3, 42);
          const Vector b{1.5, -2.0, 0.25};
          const DataMatrix xt = x.affine(a, b);
          std::vector<std::string> names = nine_estimators();
          names.insert(names.end(), {"wcov2", "wcov-2", "wcov4"});
          for (const auto& name : names) {
            const ScatterSpec s = tight(parse_estimator(name));
            const ScatterResult r0 = estimate(x, s), r1 = estimate(xt, s);
            Matrix expect = a * r0.scatter.matrix() * a.transpose();
            if (is_shape(r1.spec)) expect = expect * (r1.scatter.trace() / SymMatrix(expect).trace());
            w.update(rel_diff(r1.scatter.matrix(), expect), name);
            if (r0.location && r1.location && !r0.spec.symmetrized) {
              Vector t = a * *r0.location;
              for (std::size_t j = 0; j < t.size(); ++j) t[j] += b[j];
              double e = 0.0;
              for (std::size_t j = 0; j < t.size(); ++j) e = std::max(e, std::abs(t[j] - (*r1.location)[j]));
              w.update(e / std::max(1.0, max_abs(t)), name + " location");
            }
          }
          return w;
        });

  check("md-invariance", "md_index(P D G) == md_index(G) exactly (power-of-two D, any sign)", 0.0, [] {
    Worst w;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
      const std::size_t p = 2 + trial % 5;
      const Matrix g = random_nonsingular(p, 300 + trial);
      Rng rng(Seed{400 + trial});
      std::vector<std::size_t> perm(p);
      for (std::size_t i = 0; i < p; ++i) perm[i] = i;
      for (std::size_t i = p; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
      Matrix pdg(p, p);
      for (std::size_t i = 0; i < p; ++i) {
        const double d = std::ldexp(rng.uniform() < 0.5 ? -1.0 : 1.0, static_cast<int>(rng.index(9)) - 4);
        for (std::size_t k = 0; k < p; ++k) pdg(i, k) = d * g(perm[i], k);
      }
      w.update(std::abs(md_index(pdg) - md_index(g)), "p=" + std::to_string(p));
      // P D with D arbitrary recovers perfectly
      Matrix pd(p, p);
      for (std::size_t i = 0; i < p; ++i) pd(i, perm[i]) = (i % 2 ? -1.0 : 1.0) * (0.5 + static_cast<double>(i));
      w.update(md_index(pd), "PD p=" + std::to_string(p));
    }
    return w;
  });

  check("sym-cov-identity", "symmetrized covariance equals twice the unbiased covariance (relative)", 1e-10, [] {
    Worst w;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      const DataMatrix x = skewed_sample(30 + 17 * trial, 1 + trial, 50 + trial);
      const SymMatrix s = estimate(x, ScatterSpec::of(Family::cov, true)).scatter;
      const double n = static_cast<double>(x.n());
      const Matrix expect = sample_cov(x).scatter.matrix() * (2.0 * n / (n - 1.0));
      w.update(rel_diff(s.matrix(), expect), "trial " + std::to_string(trial));
    }
    return w;
  });

  check("parallel-determinism", "threaded symmetrized fits and replications equal the serial ones (max abs)", 1e-12,
        [] {
          Worst w;
          const DataMatrix x = skewed_sample(300, 3, 61);
          for (const auto& name : {"sHUB", "sTYL", "sCAU", "wcov2_sym"}) {
            ScatterSpec s = name == std::string("wcov2_sym") ? ScatterSpec::wcov(2.0, true) : parse_estimator(name);
            ExecutionOptions serial, threaded;
            threaded.parallel = true;
            threaded.threads = 4;
            ExecutionOptions streamed = serial;
            streamed.memory_budget = 0;
            const SymMatrix v0 = estimate(x, s, serial).scatter;
            w.update(max_abs(estimate(x, s, threaded).scatter.matrix() - v0.matrix()), std::string(name) + " threads");
            w.update(max_abs(estimate(x, s, streamed).scatter.matrix() - v0.matrix()), std::string(name) + " streamed");
          }
          ExperimentConfig cfg = default_config(Figure::indep_boxplot);
          cfg.n = 60;
          cfg.p = 3;
          cfg.reps = 6;
          cfg.estimators = {"cov", "HUB", "sTYL", "MCD"};
          cfg.threads = 1;
          const auto r1 = run_indep_boxplot(cfg);
          cfg.threads = 3;
          const auto r3 = run_indep_boxplot(cfg);
          if (r1.records.size() != r3.records.size()) return Worst{1.0, "record counts differ"};
          for (std::size_t k = 0; k < r1.records.size(); ++k)
            w.update(std::abs(r1.records[k].statistic - r3.records[k].statistic), "replication " + r1.records[k].estimator);
          return w;
        });

  return results;
}

/// One line per invariant; returns true iff all pass.
inline bool print_selftest(std::ostream& os, const std::vector<SelfTestResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::ostringstream line;
    line << (r.passed ? "PASS" : "FAIL") << "  [" << r.tag << "] " << r.description << "  max_err=" << r.max_error
         << " tol=" << r.tolerance;
    if (!r.detail.empty()) line << " (" << r.detail << ")";
    os << line.str() << '\n';
  }
  os << (ok ? "selftest: all invariants hold" : "selftest: FAILED") << '\n';
  return ok;
}

}  // namespace robscatter
