#pragma once

// Covariance plug-in methods generic over any ScatterSpec: two-scatter ICA,
// observational regression and plug-in partial correlation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/estimator.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/matrix.hpp"
#include "robscatter/types.hpp"

namespace robscatter {

struct UnmixingResult {
  Matrix unmixing;  // W, rows ordered by descending eigenvalue
  SymMatrix whitener;
  Vector kurtosis_eigenvalues;  // eigenvalues of V2 on the whitened data, descending
  ScatterSpec v1, v2;
  bool tie_warning = false;  // component order ambiguous
};

namespace detail {

/// The estimator's own location, or the sample mean for location-free (symmetrized) fits.
inline Vector plug_in_center(const DataMatrix& x, const ScatterResult& r) {
  if (r.location && !r.spec.symmetrized) return *r.location;
  return x.column_means();
}

inline Matrix block(const SymMatrix& v, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  Matrix b(r1 - r0, c1 - c0);
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) b(i - r0, j - c0) = v(i, j);
  return b;
}

}  // namespace detail

/// Whitens with V1 and rotates onto the eigenvectors of V2 computed on the
/// whitened data: W = U^T V1(x)^{-1/2}. With (cov, wcov2) this is FOBI.
inline UnmixingResult two_scatter_ica(const DataMatrix& x, const ScatterSpec& v1, const ScatterSpec& v2,
                                      const ExecutionOptions& exec = {}) {
  const std::size_t n = x.n(), p = x.p();
  require(p >= 2, "two_scatter_ica needs p >= 2");
  const ScatterResult r1 = estimate(x, v1, exec);
  UnmixingResult out;
  out.v1 = v1;
  out.v2 = v2;
  out.whitener = inv_sqrt(r1.scatter);
  const Vector c = detail::plug_in_center(x, r1);

  Matrix y(n, p);
  Vector d(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) d[j] = x(i, j) - c[j];
    const Vector yi = out.whitener.matrix() * d;
    std::copy(yi.begin(), yi.end(), y.row(i).begin());
  }
  const ScatterResult r2 = estimate(DataMatrix(std::move(y)), v2, exec);
  const EigenDecomposition e = eig_sym(r2.scatter);
  out.kurtosis_eigenvalues = e.values;
  const double scale = std::max(1.0, std::abs(e.values.front()));
  for (std::size_t k = 0; k + 1 < p; ++k)
    if (e.values[k] - e.values[k + 1] <= 1e-10 * scale) out.tie_warning = true;

  out.unmixing = e.vectors.transpose() * out.whitener.matrix();
  for (std::size_t i = 0; i < p; ++i) {
    auto row = out.unmixing.row(i);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < p; ++j)
      if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
    if (row[arg] < 0)
      for (double& v : row) v = -v;
  }
  return out;
}

inline constexpr std::size_t kMdIndexMaxDim = 8;

/// Minimum distance index (1/sqrt(p-1)) min_{P,D} ||P D G - I||_F, in [0, 1].
///
/// With rows normalized as g_ik^2 / |g_i|^2 the inner minimum over D is
/// p - sum_i ghat_{i,pi(i)}; the assignment pi is found by exhaustive search.
/// Sums run in column order, so permuting the rows of G leaves the value bit-identical.
inline double md_index(const Matrix& g) {
  require(g.square() && g.rows() >= 2, "md_index needs a square matrix with p >= 2");
  const std::size_t p = g.rows();
  require(p <= kMdIndexMaxDim, "md_index supports p <= 8");
  Matrix ghat(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < p; ++k) norm += g(i, k) * g(i, k);
    if (!(norm > 0.0)) fail(ErrorKind::InvalidInput, "md_index: zero row");
    for (std::size_t k = 0; k < p; ++k) ghat(i, k) = g(i, k) * g(i, k) / norm;
  }
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < p; ++k) s += ghat(perm[k], k);
    best = std::max(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double pd = static_cast<double>(p);
  return std::sqrt(std::max(0.0, pd - best) / (pd - 1.0));
}

struct RegressionResult {
  Matrix slopes;                  // B, p x q
  std::optional<Vector> intercept;  // unavailable for location-free scatters
  Matrix v_xx, v_xy, v_yy;
  ScatterResult joint;
};

/// B = V_xx^{-1} V_xy from the joint scatter of z = (x, y); intercept
/// mu_y - B^T mu_x when the estimator carries a location.
inline RegressionResult observational_regression(const DataMatrix& x, const DataMatrix& y, const ScatterSpec& spec,
                                                 const ExecutionOptions& exec = {}) {
  require(x.n() == y.n(), "regressors and responses need the same number of rows");
  const std::size_t p = x.p(), q = y.p();
  RegressionResult out;
  out.joint = estimate(hstack(x, y), spec, exec);
  const SymMatrix& v = out.joint.scatter;
  out.v_xx = detail::block(v, 0, p, 0, p);
  out.v_xy = detail::block(v, 0, p, p, p + q);
  out.v_yy = detail::block(v, p, p + q, p, p + q);
  out.slopes = invert(SymMatrix(out.v_xx)).matrix() * out.v_xy;
  if (out.joint.location && !out.joint.spec.symmetrized) {
    const Vector& mu = *out.joint.location;
    Vector alpha(q);
    for (std::size_t k = 0; k < q; ++k) {
      double s = mu[p + k];
      for (std::size_t j = 0; j < p; ++j) s -= out.slopes(j, k) * mu[j];
      alpha[k] = s;
    }
    out.intercept = std::move(alpha);
  }
  return out;
}

struct PartialCorrelationResult {
  double rho = 0.0;         // -v12 / sqrt(v11 v22) from the precision matrix
  double rho_schur = 0.0;   // same quantity through V_yy - V_yx V_xx^{-1} V_xy
  double v11 = 0.0, v12 = 0.0, v22 = 0.0;
  SymMatrix scatter;
};

/// Plug-in partial correlation of the first two coordinates of a scatter of z = (u, v, x).
inline PartialCorrelationResult partial_correlation_from_scatter(const SymMatrix& v) {
  const std::size_t p = v.dim();
  require(p >= 3, "partial correlation needs p >= 3");
  PartialCorrelationResult out;
  out.scatter = v;
  const SymMatrix precision = invert(v);
  out.v11 = precision(0, 0);
  out.v12 = precision(0, 1);
  out.v22 = precision(1, 1);
  out.rho = std::clamp(-out.v12 / std::sqrt(out.v11 * out.v22), -1.0, 1.0);

  const Matrix vxx_inv = invert(SymMatrix(detail::block(v, 2, p, 2, p))).matrix();
  const Matrix vyx = detail::block(v, 0, 2, 2, p);
  const Matrix partial = detail::block(v, 0, 2, 0, 2) - vyx * vxx_inv * vyx.transpose();
  out.rho_schur = std::clamp(partial(0, 1) / std::sqrt(partial(0, 0) * partial(1, 1)), -1.0, 1.0);
  return out;
}

inline PartialCorrelationResult partial_correlation(const DataMatrix& u, const DataMatrix& v, const DataMatrix& x,
                                                    const ScatterSpec& spec, const ExecutionOptions& exec = {}) {
  require(u.p() == 1 && v.p() == 1, "u and v must be single columns");
  require(u.n() == v.n() && u.n() == x.n(), "u, v and x need the same number of rows");
  const ScatterResult r = estimate(hstack(hstack(u, v), x), spec, exec);
  return partial_correlation_from_scatter(r.scatter);
}

}  // namespace robscatter
