#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "robscatter/error.hpp"

namespace robscatter {

using Vector = std::vector<double>;

/// Dense row-major matrix. Dimensions are small throughout (p <= ~50).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      require(row.size() == cols_, "ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const Vector& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  Vector col(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, "matrix dimension mismatch in +=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require(rows_ == o.rows_ && cols_ == o.cols_, "matrix dimension mismatch in -=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matrix dimension mismatch in product");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
  require(a.cols() == x.size(), "matrix-vector dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.data()) r = std::max(r, std::abs(v));
  return r;
}

inline double max_abs(std::span<const double> v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

/// Square matrix whose storage is kept exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim, double diag = 0.0) : m_(dim, dim) {
    for (std::size_t i = 0; i < dim; ++i) m_(i, i) = diag;
  }
  /// Symmetrizes as (m + m^T) / 2; exact for inputs that are already symmetric.
  explicit SymMatrix(const Matrix& m) : m_(m.rows(), m.cols()) {
    require(m.square(), "SymMatrix requires a square matrix");
    const std::size_t p = m.rows();
    for (std::size_t i = 0; i < p; ++i) {
      m_(i, i) = m(i, i);
      for (std::size_t j = i + 1; j < p; ++j) {
        const double v = m(i, j) == m(j, i) ? m(i, j) : 0.5 * (m(i, j) + m(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
    }
  }
  SymMatrix(std::initializer_list<std::initializer_list<double>> init) : SymMatrix(Matrix(init)) {}

  static SymMatrix identity(std::size_t p) { return SymMatrix(p, 1.0); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix::diagonal(d)); }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& matrix() const noexcept { return m_; }
  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
    return t;
  }
  Vector diag() const {
    Vector d(dim());
    for (std::size_t i = 0; i < dim(); ++i) d[i] = m_(i, i);
    return d;
  }

  SymMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  SymMatrix& operator+=(const SymMatrix& o) {
    m_ += o.m_;
    return *this;
  }
  bool operator==(const SymMatrix&) const = default;

 private:
  Matrix m_;
};

inline SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
inline SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
inline SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
inline double max_abs(const SymMatrix& m) { return max_abs(m.matrix()); }

/// A * S * A^T, kept exactly symmetric.
inline SymMatrix congruence(const Matrix& a, const SymMatrix& s) {
  return SymMatrix(a * s.matrix() * a.transpose());
}

/// n observations of a p-vector, one per row. All entries finite.
class DataMatrix {
 public:
  DataMatrix() = default;
  explicit DataMatrix(Matrix values) : values_(std::move(values)) {
    require(values_.rows() >= 1 && values_.cols() >= 1, "data matrix needs n >= 1 and p >= 1");
    for (double v : values_.data()) require(std::isfinite(v), "data matrix entries must be finite");
  }
  DataMatrix(std::initializer_list<std::initializer_list<double>> init) : DataMatrix(Matrix(init)) {}

  std::size_t n() const noexcept { return values_.rows(); }
  std::size_t p() const noexcept { return values_.cols(); }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const noexcept { return values_; }

  /// Rows mapped x -> A x + b.
  DataMatrix affine(const Matrix& a, std::span<const double> b) const {
    require(a.cols() == p() && b.size() == a.rows(), "affine map dimension mismatch");
    Matrix out = values_ * a.transpose();
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b[j];
    return DataMatrix(std::move(out));
  }

  /// Columns in the given order, concatenated.
  DataMatrix select_columns(std::span<const std::size_t> cols) const {
    Matrix out(n(), cols.size());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t k = 0; k < cols.size(); ++k) {
        require(cols[k] < p(), "column index out of range");
        out(i, k) = values_(i, cols[k]);
      }
    return DataMatrix(std::move(out));
  }

  Vector column_means() const {
    Vector m(p(), 0.0);
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < p(); ++j) m[j] += values_(i, j);
    for (double& v : m) v /= static_cast<double>(n());
    return m;
  }

 private:
  Matrix values_;
};

/// Horizontal concatenation [a | b]; row counts must match.
inline DataMatrix hstack(const DataMatrix& a, const DataMatrix& b) {
  require(a.n() == b.n(), "hstack row count mismatch");
  Matrix out(a.n(), a.p() + b.p());
  for (std::size_t i = 0; i < a.n(); ++i) {
    for (std::size_t j = 0; j < a.p(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.p(); ++j) out(i, a.p() + j) = b(i, j);
  }
  return DataMatrix(std::move(out));
}

}  // namespace robscatter
