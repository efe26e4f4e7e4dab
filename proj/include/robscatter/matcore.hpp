#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/matrix.hpp"

namespace robscatter {

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
};

namespace detail {

inline void check_finite(const SymMatrix& m) {
  for (double v : m.matrix().data())
    if (!std::isfinite(v)) fail(ErrorKind::InvalidInput, "matrix has non-finite entries");
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are returned in descending order. Each eigenvector is signed so
/// that its largest-magnitude entry is positive (first such entry on ties).
inline EigenDecomposition eig_sym(const SymMatrix& m) {
  detail::check_finite(m);
  const std::size_t p = m.dim();
  Matrix a = m.matrix();
  Matrix v = Matrix::identity(p);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) s += a(i, j) * a(i, j);
    return s;
  };
  double total = 0.0;
  for (double x : a.data()) total += x * x;

  for (int sweep = 0; sweep < 100; ++sweep) {
    const double off = off_norm();
    if (off == 0.0 || off <= 1e-32 * total) break;
    for (std::size_t i = 0; i + 1 < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        const double aij = a(i, j);
        if (aij == 0.0) continue;
        const double theta = (a(j, j) - a(i, i)) / (2.0 * aij);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < p; ++k) {
          const double aki = a(k, i), akj = a(k, j);
          a(k, i) = c * aki - s * akj;
          a(k, j) = s * aki + c * akj;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double aik = a(i, k), ajk = a(j, k);
          a(i, k) = c * aik - s * ajk;
          a(j, k) = s * aik + c * ajk;
        }
        a(i, j) = 0.0;
        a(j, i) = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          const double vki = v(k, i), vkj = v(k, j);
          v(k, i) = c * vki - s * vkj;
          v(k, j) = s * vki + c * vkj;
        }
      }
    }
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenDecomposition out{Vector(p), Matrix(p, p)};
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t arg = 0;
    for (std::size_t r = 1; r < p; ++r)
      if (std::abs(v(r, src)) > std::abs(v(arg, src))) arg = r;
    const double sign = v(arg, src) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < p; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

/// Relative positive-definiteness threshold: 1e-12 * max(1, largest eigenvalue).
inline double pd_tolerance(const Vector& eigenvalues) {
  return 1e-12 * std::max(1.0, eigenvalues.empty() ? 0.0 : eigenvalues.front());
}

namespace detail {

template <class F>
SymMatrix spectral_map(const EigenDecomposition& e, F f) {
  const std::size_t p = e.values.size();
  Matrix r(p, p);
  for (std::size_t k = 0; k < p; ++k) {
    const double fk = f(e.values[k]);
    for (std::size_t i = 0; i < p; ++i) {
      const double vik = e.vectors(i, k) * fk;
      for (std::size_t j = 0; j < p; ++j) r(i, j) += vik * e.vectors(j, k);
    }
  }
  return SymMatrix(r);
}

inline EigenDecomposition checked_pd(const SymMatrix& m) {
  auto e = eig_sym(m);
  if (e.values.back() <= pd_tolerance(e.values))
    fail(ErrorKind::SingularMatrix, "matrix is not positive definite (min eigenvalue " +
                                        std::to_string(e.values.back()) + ")");
  return e;
}

}  // namespace detail

/// Inverse of the symmetric positive definite square root.
inline SymMatrix inv_sqrt(const SymMatrix& m) {
  return detail::spectral_map(detail::checked_pd(m), [](double l) { return 1.0 / std::sqrt(l); });
}

/// Symmetric PSD square root; small negative eigenvalues (> -tol) are clamped to zero.
inline SymMatrix sqrt_psd(const SymMatrix& m) {
  auto e = eig_sym(m);
  const double tol = 1e-10 * std::max(1.0, std::abs(e.values.front()));
  if (e.values.back() < -tol) fail(ErrorKind::InvalidInput, "matrix is not positive semi-definite");
  return detail::spectral_map(e, [](double l) { return std::sqrt(std::max(l, 0.0)); });
}

inline SymMatrix invert(const SymMatrix& m) {
  return detail::spectral_map(detail::checked_pd(m), [](double l) { return 1.0 / l; });
}

/// Lower Cholesky factor L with m = L L^T.
inline Matrix cholesky(const SymMatrix& m) {
  const std::size_t p = m.dim();
  Matrix l(p, p);
  double scale = 0.0;
  for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, m(i, i));
  const double tol = 1e-14 * std::max(1.0, scale);
  for (std::size_t j = 0; j < p; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) fail(ErrorKind::SingularMatrix, "Cholesky factorization failed");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves L z = b in place for lower-triangular L; returns z^T z.
inline double forward_solve_norm_sq(const Matrix& l, double* b, std::size_t p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double* li = &l.data()[i * p];
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= li[k] * b[k];
    v /= li[i];
    b[i] = v;
    s += v * v;
  }
  return s;
}

inline double log_det_chol(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline double log_det(const SymMatrix& m) { return log_det_chol(cholesky(m)); }

/// V_jk / sqrt(V_jj V_kk).
inline double pseudo_correlation(const SymMatrix& v, std::size_t j, std::size_t k) {
  require(j < v.dim() && k < v.dim(), "pseudo_correlation index out of range");
  if (!(v(j, j) > 0.0) || !(v(k, k) > 0.0))
    fail(ErrorKind::DegenerateScale, "pseudo_correlation needs positive diagonal entries");
  const double r = v(j, k) / std::sqrt(v(j, j) * v(k, k));
  return std::clamp(r, -1.0, 1.0);
}

inline SymMatrix pseudo_correlation_matrix(const SymMatrix& v) {
  SymMatrix r(v.dim(), 1.0);
  for (std::size_t j = 0; j < v.dim(); ++j)
    for (std::size_t k = j + 1; k < v.dim(); ++k) r.set(j, k, pseudo_correlation(v, j, k));
  return r;
}

/// (x - center)^T v_inv (x - center).
inline double mahalanobis_sq(std::span<const double> x, std::span<const double> center, const SymMatrix& v_inv) {
  const std::size_t p = v_inv.dim();
  if (x.size() != p || center.size() != p) fail(ErrorKind::InvalidInput, "mahalanobis_sq dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double di = x[i] - center[i];
    double row = 0.0;
    for (std::size_t j = 0; j < p; ++j) row += v_inv(i, j) * (x[j] - center[j]);
    s += di * row;
  }
  return std::max(s, 0.0);
}

}  // namespace robscatter
