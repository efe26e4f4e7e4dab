#pragma once

// Classical and M-type scatter/shape estimators.
//
// Every estimator centers either at its own location estimate or at a
// caller-supplied fixed location. The fixed-location mode is what the
// pairwise-difference estimators in symmetrize.hpp build on.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/matrix.hpp"
#include "robscatter/stats.hpp"
#include "robscatter/types.hpp"

namespace robscatter {

/// Squared distances below this are treated as zero.
inline constexpr double kZeroDistanceSq = 1e-24;

namespace detail {

/// Adds w * d d^T to the upper triangle of the row-major p x p buffer.
inline void add_outer_upper(double* acc, const double* d, double w, std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) {
    const double wdj = w * d[j];
    double* row = acc + j * p;
    for (std::size_t k = j; k < p; ++k) row[k] += wdj * d[k];
  }
}

inline SymMatrix from_upper(const Matrix& acc, double scale) {
  const std::size_t p = acc.rows();
  SymMatrix v(p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = j; k < p; ++k) v.set(j, k, acc(j, k) * scale);
  return v;
}

inline void normalize(SymMatrix& v, Normalization how) {
  const double p = static_cast<double>(v.dim());
  switch (how) {
    case Normalization::none: break;
    case Normalization::trace_p: v *= p / v.trace(); break;
    case Normalization::det_1: v *= std::exp(-log_det(v) / p); break;
  }
}

inline Vector center_of(const DataMatrix& x, const std::optional<Vector>& fixed) {
  if (fixed) {
    require(fixed->size() == x.p(), "fixed location has wrong dimension");
    return *fixed;
  }
  return x.column_means();
}

/// (1/n) sum (x_i - c)(x_i - c)^T.
inline SymMatrix second_moment(const DataMatrix& x, std::span<const double> c) {
  const std::size_t p = x.p();
  Matrix acc(p, p);
  Vector d(p);
  for (std::size_t i = 0; i < x.n(); ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < p; ++j) d[j] = r[j] - c[j];
    add_outer_upper(acc.data().data(), d.data(), 1.0, p);
  }
  return from_upper(acc, 1.0 / static_cast<double>(x.n()));
}

}  // namespace detail

/// Sample covariance with divisor n, centered at the sample mean (or the fixed location).
inline ScatterResult sample_cov(const DataMatrix& x, const std::optional<Vector>& fixed_location = std::nullopt) {
  require(x.n() >= 2, "sample_cov needs n >= 2");
  ScatterResult r;
  const Vector c = detail::center_of(x, fixed_location);
  r.scatter = detail::second_moment(x, c);
  r.location = c;
  r.spec = ScatterSpec::of(Family::cov);
  r.spec.fixed_location = fixed_location;
  return r;
}

/// Weighted covariance E(r^alpha (x - Ex)(x - Ex)^T), r the Mahalanobis distance w.r.t. cov.
inline ScatterResult wcov(const DataMatrix& x, double alpha, const std::optional<Vector>& fixed_location = std::nullopt) {
  require(std::isfinite(alpha), "wcov alpha must be finite");
  require(x.n() > x.p(), "wcov needs n > p");
  if (alpha == 0.0) {
    auto r = sample_cov(x, fixed_location);
    r.spec = ScatterSpec::wcov(0.0);
    r.spec.fixed_location = fixed_location;
    return r;
  }
  const std::size_t p = x.p();
  const Vector c = detail::center_of(x, fixed_location);
  const Matrix l = cholesky(detail::second_moment(x, c));
  Matrix acc(p, p);
  Vector d(p), z(p);
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < x.n(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < p; ++j) d[j] = z[j] = row[j] - c[j];
    const double r2 = forward_solve_norm_sq(l, z.data(), p);
    if (r2 < kZeroDistanceSq) {
      ++dropped;
      if (alpha < 0.0) continue;
    }
    detail::add_outer_upper(acc.data().data(), d.data(), std::pow(r2, 0.5 * alpha), p);
  }
  ScatterResult r;
  r.scatter = detail::from_upper(acc, 1.0 / static_cast<double>(x.n()));
  r.location = c;
  r.dropped = alpha < 0.0 ? dropped : 0;
  r.spec = ScatterSpec::wcov(alpha);
  r.spec.fixed_location = fixed_location;
  return r;
}

struct Atom {
  Vector x;
  double prob;
};

/// Population wcov_alpha of a finite-support law, by enumeration of its atoms.
inline SymMatrix exact_wcov(const std::vector<Atom>& atoms, double alpha) {
  require(!atoms.empty(), "exact_wcov needs atoms");
  const std::size_t p = atoms.front().x.size();
  double total = 0.0;
  Vector mu(p, 0.0);
  for (const auto& a : atoms) {
    require(a.x.size() == p && a.prob >= 0.0, "exact_wcov atoms need equal dimension and non-negative mass");
    total += a.prob;
    for (std::size_t j = 0; j < p; ++j) mu[j] += a.prob * a.x[j];
  }
  require(std::abs(total - 1.0) <= 1e-12, "exact_wcov probabilities must sum to 1");
  Matrix acc(p, p);
  Vector d(p);
  for (const auto& a : atoms) {
    for (std::size_t j = 0; j < p; ++j) d[j] = a.x[j] - mu[j];
    detail::add_outer_upper(acc.data().data(), d.data(), a.prob, p);
  }
  const Matrix l = cholesky(detail::from_upper(acc, 1.0));
  Matrix out(p, p);
  Vector z(p);
  for (const auto& a : atoms) {
    for (std::size_t j = 0; j < p; ++j) d[j] = z[j] = a.x[j] - mu[j];
    const double r2 = forward_solve_norm_sq(l, z.data(), p);
    if (r2 < kZeroDistanceSq && alpha < 0.0) continue;
    detail::add_outer_upper(out.data().data(), d.data(), a.prob * std::pow(r2, 0.5 * alpha), p);
  }
  return detail::from_upper(out, 1.0);
}

// ---------------------------------------------------------------------------
// M-estimators

/// Scatter weight w(s) and location weight u(s) of an M-estimator, s = d^2.
struct MWeights {
  Family family = Family::m_cauchy;
  double p = 1.0;
  double c2 = 0.0;      // Huber cutoff, chi2_p quantile at q
  double sigma2 = 1.0;  // Huber consistency constant

  bool singular_at_zero() const { return family == Family::tyler; }

  double scatter(double s) const {
    switch (family) {
      case Family::m_cauchy: return (p + 1.0) / (1.0 + s);
      case Family::m_huber: return (s <= c2 ? 1.0 : c2 / s) / sigma2;
      case Family::tyler: return p / s;
      default: return 1.0;
    }
  }
  double location(double s) const {
    switch (family) {
      case Family::m_cauchy: return 1.0 / (1.0 + s);
      case Family::m_huber: return s <= c2 ? 1.0 : std::sqrt(c2 / s);
      default: return 1.0;
    }
  }
};

/// Huber constants: c^2 = chi2_p quantile at q; sigma^2 makes E[w(d^2) d^2] = p under N_p(0, I),
/// i.e. sigma^2 = F_{p+2}(c^2) + c^2 (1 - q) / p.
inline MWeights make_weights(const ScatterSpec& spec, std::size_t p) {
  MWeights w;
  w.family = spec.family;
  w.p = static_cast<double>(p);
  if (spec.family == Family::m_huber) {
    require(spec.q > 0.0 && spec.q < 1.0, "Huber tuning q must lie in (0, 1)");
    w.c2 = stats::chisq_quantile(w.p, spec.q);
    w.sigma2 = stats::chisq_cdf(w.p + 2.0, w.c2) + w.c2 * (1.0 - spec.q) / w.p;
  } else if (spec.family != Family::m_cauchy && spec.family != Family::tyler) {
    fail(ErrorKind::InvalidInput, "not an M-estimator family: " + spec_tag(spec));
  }
  return w;
}

inline Normalization effective_normalization(const ScatterSpec& spec) {
  if (spec.family == Family::tyler && spec.irls.normalization == Normalization::none) return Normalization::trace_p;
  return spec.irls.normalization;
}

namespace detail {

struct IrlsStep {
  SymMatrix scatter;       // unnormalized update
  double location_change;  // max-norm change of the location (0 when fixed)
  std::size_t dropped;
};

/// Runs V_{k+1} = step(V_k) until the relative max-norm change falls below tol.
template <class Step>
ScatterResult run_irls(SymMatrix v, const ScatterSpec& spec, Step&& step) {
  const Normalization norm = effective_normalization(spec);
  require(spec.irls.tol > 0.0 && spec.irls.max_iter >= 1, "IRLS settings need tol > 0 and max_iter >= 1");
  normalize(v, norm);
  ScatterResult r;
  r.spec = spec;
  for (int it = 1; it <= spec.irls.max_iter; ++it) {
    IrlsStep s = step(cholesky(v));
    normalize(s.scatter, norm);
    double change = 0.0;
    for (std::size_t k = 0; k < v.matrix().data().size(); ++k)
      change = std::max(change, std::abs(s.scatter.matrix().data()[k] - v.matrix().data()[k]));
    const double scale = max_abs(s.scatter);
    double max_diag = 0.0;
    for (double dj : s.scatter.diag()) max_diag = std::max(max_diag, dj);
    v = std::move(s.scatter);
    r.iterations = it;
    r.dropped = s.dropped;
    if (change <= spec.irls.tol * scale && s.location_change <= spec.irls.tol * std::sqrt(max_diag)) {
      r.scatter = std::move(v);
      r.converged = true;
      return r;
    }
  }
  r.scatter = std::move(v);
  r.converged = false;
  return r;
}

inline SymMatrix irls_start(const SymMatrix& moment) {
  try {
    (void)cholesky(moment);
    return moment;
  } catch (const Error&) {
    return SymMatrix::identity(moment.dim());
  }
}

}  // namespace detail

/// M-estimate of scatter (Huber, Cauchy) or Tyler's shape by iteratively reweighted
/// least squares: V_{k+1} = (1/n) sum w(d_i^2)(x_i - t)(x_i - t)^T.
///
/// Cauchy and Huber iterate the location jointly, t = sum u_i x_i / sum u_i,
/// unless spec.fixed_location is set; Tyler uses the fixed location or the
/// sample mean and is normalized to trace p. Observations at squared distance
/// below 1e-24 from the location are dropped for Tyler and counted.
inline ScatterResult m_estimate(const DataMatrix& x, const ScatterSpec& spec) {
  const std::size_t n = x.n(), p = x.p();
  require(n > p, "m_estimate needs n > p");
  const MWeights w = make_weights(spec, p);
  const bool joint_location = !spec.fixed_location && spec.family != Family::tyler;
  Vector t = detail::center_of(x, spec.fixed_location);

  Vector d(p), z(p), loc(p);
  auto step = [&](const Matrix& l) {
    Matrix acc(p, p);
    std::fill(loc.begin(), loc.end(), 0.0);
    double loc_w = 0.0;
    std::size_t dropped = 0, used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      for (std::size_t j = 0; j < p; ++j) d[j] = z[j] = row[j] - t[j];
      const double s = forward_solve_norm_sq(l, z.data(), p);
      if (w.singular_at_zero() && s < kZeroDistanceSq) {
        ++dropped;
        continue;
      }
      ++used;
      detail::add_outer_upper(acc.data().data(), d.data(), w.scatter(s), p);
      if (joint_location) {
        const double u = w.location(s);
        loc_w += u;
        for (std::size_t j = 0; j < p; ++j) loc[j] += u * row[j];
      }
    }
    if (used <= p) fail(ErrorKind::DegenerateObservation, "too few observations away from the location");
    detail::IrlsStep out{detail::from_upper(acc, 1.0 / static_cast<double>(n)), 0.0, dropped};
    if (joint_location) {
      for (std::size_t j = 0; j < p; ++j) {
        const double tj = loc[j] / loc_w;
        out.location_change = std::max(out.location_change, std::abs(tj - t[j]));
        t[j] = tj;
      }
    }
    return out;
  };

  ScatterResult r = detail::run_irls(detail::irls_start(detail::second_moment(x, t)), spec, step);
  r.location = t;
  if (!r.converged)
    throw ConvergenceFailure(spec_tag(spec) + " did not converge in " + std::to_string(spec.irls.max_iter) +
                                 " iterations",
                             r);
  return r;
}

}  // namespace robscatter
