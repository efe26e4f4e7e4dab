#pragma once

// Minimum volume ellipsoid and minimum covariance determinant estimators.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/matrix.hpp"
#include "robscatter/randgen.hpp"
#include "robscatter/scatter.hpp"
#include "robscatter/stats.hpp"
#include "robscatter/types.hpp"

namespace robscatter {

/// Covering ellipsoid {x : (x - center)^T shape^{-1} (x - center) <= 1}.
struct Ellipsoid {
  Vector center;
  SymMatrix shape;
  double log_volume = 0.0;  // 0.5 log det(shape); the unit-ball constant is dropped
};

/// Minimum-volume enclosing ellipsoid of the rows of `points` by the Khachiyan
/// iteration with Todd-Yildirim away steps. Converged when every lifted
/// leverage is within a relative `tol` of p + 1. Returns nullopt for affinely
/// degenerate point sets.
inline std::optional<Ellipsoid> min_volume_ellipsoid(const Matrix& points, double tol = 1e-10,
                                                     int max_iter = 200000) {
  const std::size_t m = points.rows(), p = points.cols();
  if (m < p + 1) return std::nullopt;
  const std::size_t d = p + 1;
  const double dd = static_cast<double>(d);
  Vector u(m, 1.0 / static_cast<double>(m));
  Vector lifted(d), lev(m);

  auto leverages = [&]() -> bool {
    Matrix acc(d, d);
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = points.row(i);
      std::copy(r.begin(), r.end(), lifted.begin());
      lifted[p] = 1.0;
      detail::add_outer_upper(acc.data().data(), lifted.data(), u[i], d);
    }
    Matrix l;
    try {
      l = cholesky(detail::from_upper(acc, 1.0));
    } catch (const Error&) {
      return false;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = points.row(i);
      std::copy(r.begin(), r.end(), lifted.begin());
      lifted[p] = 1.0;
      lev[i] = forward_solve_norm_sq(l, lifted.data(), d);
    }
    return true;
  };

  {
    // Affine degeneracy shows up as a (relatively) singular scatter of the points.
    Vector mean(p, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p; ++j) mean[j] += points(i, j) / static_cast<double>(m);
    Matrix acc(p, p);
    Vector dv(p);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) dv[j] = points(i, j) - mean[j];
      detail::add_outer_upper(acc.data().data(), dv.data(), 1.0, p);
    }
    const auto e = eig_sym(detail::from_upper(acc, 1.0 / static_cast<double>(m)));
    if (!(e.values.back() > 1e-12 * std::max(e.values.front(), std::numeric_limits<double>::min()))) return std::nullopt;
  }

  for (int it = 0; it < max_iter; ++it) {
    if (!leverages()) return std::nullopt;
    std::size_t up = 0, down = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (lev[i] > lev[up]) up = i;
      if (u[i] > 0.0 && (down == m || lev[i] < lev[down])) down = i;
    }
    const double gain = lev[up] / dd - 1.0;
    const double loss = 1.0 - lev[down] / dd;
    if (std::max(gain, loss) <= tol) break;
    if (gain >= loss) {
      const double a = (lev[up] - dd) / (dd * (lev[up] - 1.0));
      for (double& w : u) w *= 1.0 - a;
      u[up] += a;
    } else {
      const double a_max = u[down] / (1.0 - u[down]);
      // Lifted leverages are >= 1; a point at the weighted center is dropped outright.
      double a = lev[down] > 1.0 + 1e-12 ? (dd - lev[down]) / (dd * (lev[down] - 1.0)) : a_max;
      const bool drop = a >= a_max;
      a = std::min(a, a_max);
      for (double& w : u) w *= 1.0 + a;
      u[down] = drop ? 0.0 : u[down] - a;
    }
  }

  Ellipsoid e;
  e.center.assign(p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) e.center[j] += u[i] * points(i, j);
  Matrix acc(p, p);
  Vector dv(p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) dv[j] = points(i, j) - e.center[j];
    detail::add_outer_upper(acc.data().data(), dv.data(), u[i], p);
  }
  SymMatrix shape = detail::from_upper(acc, static_cast<double>(p));
  Matrix l;
  try {
    l = cholesky(shape);
  } catch (const Error&) {
    return std::nullopt;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) dv[j] = points(i, j) - e.center[j];
    worst = std::max(worst, forward_solve_norm_sq(l, dv.data(), p));
  }
  shape *= worst;  // exact coverage of every input point
  e.log_volume = 0.5 * (log_det_chol(l) + static_cast<double>(p) * std::log(worst));
  e.shape = std::move(shape);
  return e;
}

namespace detail {

inline std::size_t default_h(std::size_t n, std::size_t p) { return (n + p + 1) / 2; }

inline std::size_t resolve_h(const SubsetSpec& spec, std::size_t n, std::size_t p) {
  require(n > p, "subset estimators need n > p");
  const std::size_t h = spec.h.value_or(default_h(n, p));
  require(h >= p + 1 && h <= n, "subset size h must satisfy p + 1 <= h <= n");
  require(spec.n_starts >= 1 && spec.c_steps >= 1, "subset estimators need n_starts >= 1 and c_steps >= 1");
  return h;
}

struct MeanCov {
  Vector mean;
  SymMatrix cov;
  Matrix chol;
  double log_det = 0.0;
};

inline std::optional<MeanCov> mean_cov(const DataMatrix& x, std::span<const std::size_t> idx) {
  const std::size_t p = x.p();
  MeanCov mc;
  mc.mean.assign(p, 0.0);
  for (std::size_t i : idx)
    for (std::size_t j = 0; j < p; ++j) mc.mean[j] += x(i, j);
  for (double& v : mc.mean) v /= static_cast<double>(idx.size());
  Matrix acc(p, p);
  Vector d(p);
  for (std::size_t i : idx) {
    for (std::size_t j = 0; j < p; ++j) d[j] = x(i, j) - mc.mean[j];
    add_outer_upper(acc.data().data(), d.data(), 1.0, p);
  }
  mc.cov = from_upper(acc, 1.0 / static_cast<double>(idx.size()));
  try {
    mc.chol = cholesky(mc.cov);
  } catch (const Error&) {
    return std::nullopt;
  }
  // Relative conditioning guard: an exact fit on a hyperplane is degenerate.
  double min_l = std::numeric_limits<double>::max(), max_l = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    min_l = std::min(min_l, mc.chol(j, j));
    max_l = std::max(max_l, mc.chol(j, j));
  }
  if (min_l <= 1e-7 * max_l) return std::nullopt;
  mc.log_det = log_det_chol(mc.chol);
  return mc;
}

inline Vector distances_sq(const DataMatrix& x, const MeanCov& mc) {
  const std::size_t p = x.p();
  Vector out(x.n());
  Vector z(p);
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t j = 0; j < p; ++j) z[j] = x(i, j) - mc.mean[j];
    out[i] = forward_solve_norm_sq(mc.chol, z.data(), p);
  }
  return out;
}

/// Indices of the h smallest distances; ties broken by index. Sorted ascending by index.
inline std::vector<std::size_t> smallest_h(const Vector& d2, std::size_t h) {
  std::vector<std::size_t> idx(d2.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h - 1), idx.end(), less);
  idx.resize(h);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Random elemental (p + 1)-subset, extended by further random points until its
/// covariance is nonsingular. Draws depend on the generator only, never the data.
inline std::optional<MeanCov> elemental_start(const DataMatrix& x, Rng& rng, std::vector<std::size_t>& perm) {
  const std::size_t n = x.n(), p = x.p();
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + rng.index(n - k);
    std::swap(perm[k], perm[j]);
    if (k + 1 >= p + 1) {
      if (auto mc = mean_cov(x, std::span<const std::size_t>(perm.data(), k + 1))) return mc;
    }
  }
  return std::nullopt;
}

inline double mcd_consistency(std::size_t h, std::size_t n, std::size_t p) {
  if (h >= n) return 1.0;
  const double frac = static_cast<double>(h) / static_cast<double>(n);
  const double dp = static_cast<double>(p);
  return frac / stats::chisq_cdf(dp + 2.0, stats::chisq_quantile(dp, frac));
}

inline double mve_consistency(double frac, std::size_t p) {
  if (frac >= 1.0) return 1.0;
  return 1.0 / stats::chisq_quantile(static_cast<double>(p), frac);
}

}  // namespace detail

/// Minimum covariance determinant: elemental starts refined by C-steps (two per
/// start, then the ten best run to convergence). Scatter is the raw h-subset
/// covariance times c = (h/n) / F_{chi2_{p+2}}(chi2_{p, h/n}).
inline ScatterResult mcd(const DataMatrix& x, const SubsetSpec& spec = {}) {
  const std::size_t n = x.n(), p = x.p();
  const std::size_t h = detail::resolve_h(spec, n, p);

  struct Candidate {
    detail::MeanCov mc;
    std::vector<std::size_t> subset;
    int start;
  };
  // One concentration step; false once the determinant stops decreasing.
  // A start whose first h-subset is singular is left with an empty subset.
  auto c_step = [&](Candidate& c) -> bool {
    auto idx = detail::smallest_h(detail::distances_sq(x, c.mc), h);
    if (idx == c.subset) return false;
    auto next = detail::mean_cov(x, idx);
    if (!next) return false;
    if (!c.subset.empty() && next->log_det >= c.mc.log_det) return false;
    c.mc = std::move(*next);
    c.subset = std::move(idx);
    return true;
  };

  std::vector<Candidate> cands;
  Rng rng(Seed{spec.seed});
  std::vector<std::size_t> perm(n);
  if (h == n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    if (auto mc = detail::mean_cov(x, all)) cands.push_back({std::move(*mc), all, 0});
  } else {
    for (int s = 0; s < spec.n_starts; ++s) {
      auto mc = detail::elemental_start(x, rng, perm);
      if (!mc) continue;
      Candidate c{std::move(*mc), {}, s};
      for (int k = 0; k < 2 && c_step(c); ++k) {
      }
      if (c.subset.size() == h) cands.push_back(std::move(c));
    }
  }
  if (cands.empty()) fail(ErrorKind::DegenerateSubset, "every MCD start produced a singular subset");

  auto better = [](const Candidate& a, const Candidate& b) {
    return a.mc.log_det < b.mc.log_det || (a.mc.log_det == b.mc.log_det && a.start < b.start);
  };
  std::sort(cands.begin(), cands.end(), better);
  if (cands.size() > 10) cands.resize(10);
  for (auto& c : cands)
    for (int k = 0; k < spec.c_steps && c_step(c); ++k) {
    }
  const auto best = std::min_element(cands.begin(), cands.end(), better);

  ScatterResult r;
  r.scatter = best->mc.cov * detail::mcd_consistency(h, n, p);
  r.location = best->mc.mean;
  r.spec = ScatterSpec::of(Family::mcd);
  r.spec.subset = spec;
  return r;
}

/// Raw MCD criterion: log det of the covariance (divisor h) of an h-subset.
inline std::optional<double> subset_log_det(const DataMatrix& x, std::span<const std::size_t> idx) {
  auto mc = detail::mean_cov(x, idx);
  if (!mc) return std::nullopt;
  return mc->log_det;
}

struct MveFit {
  Ellipsoid raw;  // covers at least h observations
  std::size_t h = 0;
  double consistency_factor = 1.0;
  bool exact = false;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Calls f(indices) for every k-subset of {0..n-1} in lexicographic order.
template <class F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  for (;;) {
    f(std::span<const std::size_t>(idx));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline Matrix rows_of(const DataMatrix& x, std::span<const std::size_t> idx) {
  Matrix m(idx.size(), x.p());
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (std::size_t j = 0; j < x.p(); ++j) m(k, j) = x(idx[k], j);
  return m;
}

inline std::size_t covered(const DataMatrix& x, const Ellipsoid& e) {
  const std::size_t p = x.p();
  Matrix l;
  try {
    l = cholesky(e.shape);
  } catch (const Error&) {
    return 0;
  }
  std::size_t count = 0;
  Vector z(p);
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t j = 0; j < p; ++j) z[j] = x(i, j) - e.center[j];
    if (forward_solve_norm_sq(l, z.data(), p) <= 1.0 + 1e-9) ++count;
  }
  return count;
}

inline constexpr double kExactMveBudget = 4e5;

/// Exact MVE for small n: the optimal ellipsoid is the minimum enclosing
/// ellipsoid of at most p(p+3)/2 support points, so either every such support
/// set or every h-subset is enumerated, whichever is fewer.
inline std::optional<Ellipsoid> exact_mve(const DataMatrix& x, std::size_t h) {
  const std::size_t n = x.n(), p = x.p();
  const std::size_t max_support = std::min(h, p * (p + 3) / 2);
  double support_count = 0.0;
  for (std::size_t k = p + 1; k <= max_support; ++k) support_count += binomial(n, k);
  const double h_count = binomial(n, h);
  if (std::min(support_count, h_count) > kExactMveBudget) return std::nullopt;

  std::optional<Ellipsoid> best;
  auto consider = [&](std::span<const std::size_t> idx, bool check_cover) {
    auto e = min_volume_ellipsoid(rows_of(x, idx));
    if (!e || (best && e->log_volume >= best->log_volume)) return;
    if (check_cover && covered(x, *e) < h) return;
    best = std::move(e);
  };
  if (h_count <= support_count) {
    for_each_subset(n, h, [&](auto idx) { consider(idx, false); });
  } else {
    for (std::size_t k = p + 1; k <= max_support; ++k) for_each_subset(n, k, [&](auto idx) { consider(idx, true); });
  }
  return best;
}

}  // namespace detail

/// Minimum volume ellipsoid covering at least h observations. For n <= 20 (and
/// spec.exact_small) the search is exhaustive; otherwise elemental (p+1)-point
/// ellipsoids are inflated to cover h points and the smallest is kept.
inline MveFit mve_fit(const DataMatrix& x, const SubsetSpec& spec = {}) {
  const std::size_t n = x.n(), p = x.p();
  const std::size_t h = detail::resolve_h(spec, n, p);
  MveFit fit;
  fit.h = h;
  fit.consistency_factor = detail::mve_consistency(static_cast<double>(h) / static_cast<double>(n), p);

  if (spec.exact_small && n <= 20) {
    if (auto e = detail::exact_mve(x, h)) {
      fit.raw = std::move(*e);
      fit.exact = true;
      return fit;
    }
  }

  Rng rng(Seed{spec.seed});
  std::vector<std::size_t> perm(n);
  std::optional<Ellipsoid> best;
  for (int s = 0; s < spec.n_starts; ++s) {
    auto mc = detail::elemental_start(x, rng, perm);
    if (!mc) continue;
    Vector d2 = detail::distances_sq(x, *mc);
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(h - 1), d2.end());
    const double m2 = d2[h - 1];
    if (!(m2 > 0.0)) continue;
    const double log_vol = 0.5 * (mc->log_det + static_cast<double>(p) * std::log(m2));
    if (best && log_vol >= best->log_volume) continue;
    best = Ellipsoid{mc->mean, mc->cov * m2, log_vol};
  }
  if (!best) fail(ErrorKind::DegenerateSubset, "every MVE start produced a singular subset");
  fit.raw = std::move(*best);
  return fit;
}

inline ScatterResult mve(const DataMatrix& x, const SubsetSpec& spec = {}) {
  MveFit fit = mve_fit(x, spec);
  ScatterResult r;
  r.scatter = fit.raw.shape * fit.consistency_factor;
  r.location = fit.raw.center;
  r.spec = ScatterSpec::of(Family::mve);
  r.spec.subset = spec;
  return r;
}

struct EllipsoidResult {
  Vector center;
  SymMatrix shape;  // raw covering ellipsoid
  double covered_mass = 0.0;
  double consistency_factor = 1.0;
  SymMatrix scatter;  // shape * consistency_factor
  std::vector<std::size_t> selected;
};

/// Population MVE of a finite-support law: the minimum-volume ellipsoid over all
/// atom subsets carrying mass >= h.
inline EllipsoidResult population_mve(const std::vector<Atom>& atoms, double h) {
  require(!atoms.empty(), "population_mve needs atoms");
  require(h > 0.0 && h < 1.0, "population_mve needs 0 < h < 1");
  if (atoms.size() > 20) fail(ErrorKind::Unsupported, "population_mve supports at most 20 atoms");
  const std::size_t m = atoms.size(), p = atoms.front().x.size();
  double total = 0.0;
  for (const auto& a : atoms) {
    require(a.x.size() == p && a.prob >= 0.0, "atoms need equal dimension and non-negative mass");
    total += a.prob;
  }
  require(std::abs(total - 1.0) <= 1e-12, "atom probabilities must sum to 1");

  std::optional<Ellipsoid> best;
  std::uint32_t best_mask = 0;
  double best_mass = 0.0;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    double mass = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      if (mask & (1u << k)) mass += atoms[k].prob;
    if (mass < h - 1e-12) continue;
    Matrix pts(static_cast<std::size_t>(std::popcount(mask)), p);
    std::size_t r = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (mask & (1u << k)) {
        for (std::size_t j = 0; j < p; ++j) pts(r, j) = atoms[k].x[j];
        ++r;
      }
    auto e = min_volume_ellipsoid(pts);
    if (!e) fail(ErrorKind::DegenerateSubset, "a subset carrying mass >= h lies in a hyperplane");
    if (!best || e->log_volume < best->log_volume) {
      best = std::move(e);
      best_mask = mask;
      best_mass = mass;
    }
  }
  if (!best) fail(ErrorKind::DegenerateSubset, "no atom subset carries mass >= h");

  EllipsoidResult out;
  out.center = best->center;
  out.shape = best->shape;
  out.covered_mass = best_mass;
  out.consistency_factor = detail::mve_consistency(h, p);
  out.scatter = best->shape * out.consistency_factor;
  for (std::size_t k = 0; k < m; ++k)
    if (best_mask & (1u << k)) out.selected.push_back(k);
  return out;
}

}  // namespace robscatter
