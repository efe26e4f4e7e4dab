#pragma once

// Symmetrized scatter: the inner estimator applied to all pairwise differences
// x_i - x_j (i > j), centered at the origin.
//
// M-estimators iterate
//   V_{k+1} = 2/(n(n-1)) sum_i S^i,  S^i = sum_{j<i} w(d_ij' V_k^{-1} d_ij) d_ij d_ij',
// where the per-i partial sums are grouped in fixed blocks of rows and combined
// by a fixed binary tree, so the result does not depend on the thread count or
// on whether the differences are materialized.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "robscatter/error.hpp"
#include "robscatter/matcore.hpp"
#include "robscatter/matrix.hpp"
#include "robscatter/parallel.hpp"
#include "robscatter/scatter.hpp"
#include "robscatter/types.hpp"

namespace robscatter {

/// The n(n-1)/2 differences x_i - x_j, i > j, visited in blocks of consecutive i.
class PairDifferenceView {
 public:
  static constexpr std::size_t kRowsPerBlock = 16;

  explicit PairDifferenceView(const DataMatrix& base) : base_(&base) {}
  explicit PairDifferenceView(DataMatrix&&) = delete;  // the view does not own the rows

  std::size_t n() const { return base_->n(); }
  std::size_t p() const { return base_->p(); }
  std::size_t size() const { return n() * (n() - 1) / 2; }
  std::size_t block_count() const { return (n() - 1 + kRowsPerBlock - 1) / kRowsPerBlock; }
  std::size_t bytes() const { return size() * p() * sizeof(double); }

  /// Rows i in [first, last) of block b (i >= 1).
  std::pair<std::size_t, std::size_t> block_rows(std::size_t b) const {
    const std::size_t first = 1 + b * kRowsPerBlock;
    return {first, std::min(n(), first + kRowsPerBlock)};
  }
  /// Offset of the first pair of row i in pair order.
  static std::size_t pair_offset(std::size_t i) { return i * (i - 1) / 2; }

  /// f(delta) for every pair of block b, delta a pointer to p doubles.
  template <class F>
  void for_each_in_block(std::size_t b, F&& f) const {
    const std::size_t pp = p();
    std::vector<double> d(pp);
    const auto [first, last] = block_rows(b);
    for (std::size_t i = first; i < last; ++i) {
      const auto xi = base_->row(i);
      for (std::size_t j = 0; j < i; ++j) {
        const auto xj = base_->row(j);
        for (std::size_t k = 0; k < pp; ++k) d[k] = xi[k] - xj[k];
        f(static_cast<const double*>(d.data()));
      }
    }
  }

  /// All differences, one per row, in pair order.
  Matrix materialize() const {
    Matrix out(size(), p());
    std::size_t r = 0;
    for (std::size_t b = 0; b < block_count(); ++b)
      for_each_in_block(b, [&](const double* d) {
        std::copy(d, d + p(), out.row(r).begin());
        ++r;
      });
    return out;
  }

 private:
  const DataMatrix* base_;
};

struct SymmetrizedSpec {
  ScatterSpec inner;
  bool parallel = false;
  std::size_t threads = 0;  // 0: one per hardware thread (only when parallel)
  std::size_t memory_budget = std::size_t{1} << 30;
};

namespace detail {

struct PairSums {
  Matrix acc;
  std::size_t dropped = 0;
};

/// Weighted outer-product sum over all pairs: sum w(s) d d^T, s = |L^{-1} d|^2.
/// Without a factor, every weight is one. Differences with s < 1e-24 are
/// skipped when `drop_zero` is set.
template <class Weight>
PairSums pair_pass(const PairDifferenceView& view, const Matrix* materialized, const Matrix* chol, Weight&& weight,
                   bool drop_zero, const SymmetrizedSpec& spec) {
  const std::size_t p = view.p();
  std::vector<PairSums> parts(view.block_count());
  auto run_block = [&](std::size_t b) {
    PairSums& out = parts[b];
    out.acc = Matrix(p, p);
    std::vector<double> z(p);
    auto visit = [&](const double* d) {
      double w = 1.0;
      if (chol) {
        std::copy(d, d + p, z.begin());
        const double s = forward_solve_norm_sq(*chol, z.data(), p);
        if (drop_zero && s < kZeroDistanceSq) {
          ++out.dropped;
          return;
        }
        w = weight(s);
      }
      add_outer_upper(out.acc.data().data(), d, w, p);
    };
    if (materialized) {
      const auto [first, last] = view.block_rows(b);
      for (std::size_t r = PairDifferenceView::pair_offset(first); r < PairDifferenceView::pair_offset(last); ++r)
        visit(materialized->row(r).data());
    } else {
      view.for_each_in_block(b, visit);
    }
  };
  parallel_for(parts.size(), spec.parallel ? spec.threads : 1, run_block);
  return tree_reduce(std::move(parts), [](PairSums& a, const PairSums& b) {
    a.acc += b.acc;
    a.dropped += b.dropped;
  });
}

}  // namespace detail

/// Inner estimator applied to the pairwise differences, centered at the origin.
inline ScatterResult symmetrized_estimate(const DataMatrix& x, const SymmetrizedSpec& spec) {
  const std::size_t n = x.n(), p = x.p();
  require(n >= 3, "symmetrized estimators need n >= 3");
  const Family fam = spec.inner.family;
  if (fam == Family::mve || fam == Family::mcd)
    fail(ErrorKind::Unsupported, "symmetrized " + spec_tag(spec.inner) + " is not supported");

  ScatterSpec inner = spec.inner;
  inner.fixed_location = Vector(p, 0.0);
  inner.symmetrized = true;

  const PairDifferenceView view(x);
  std::optional<Matrix> stored;
  if (view.bytes() <= spec.memory_budget) stored = view.materialize();
  const Matrix* mat = stored ? &*stored : nullptr;
  const double inv_pairs = 1.0 / static_cast<double>(view.size());

  auto unit = [](double) { return 1.0; };
  const auto moment = detail::pair_pass(view, mat, nullptr, unit, false, spec);
  const SymMatrix v0 = detail::from_upper(moment.acc, inv_pairs);
  if (max_abs(v0) == 0.0) fail(ErrorKind::DegenerateObservation, "all pairwise differences are zero");

  ScatterResult r;
  r.spec = inner;
  if (fam == Family::cov) {
    r.scatter = v0;
  } else if (fam == Family::wcov) {
    require(std::isfinite(inner.alpha), "wcov alpha must be finite");
    require(view.size() > p, "wcov needs more pairs than dimensions");
    const Matrix l = cholesky(v0);
    const double half_alpha = 0.5 * inner.alpha;
    const auto sums = detail::pair_pass(
        view, mat, &l, [&](double s) { return std::pow(s, half_alpha); }, inner.alpha < 0.0, spec);
    r.scatter = detail::from_upper(sums.acc, inv_pairs);
    r.dropped = sums.dropped;
  } else {
    const MWeights w = make_weights(inner, p);
    auto step = [&](const Matrix& l) {
      const auto sums = detail::pair_pass(
          view, mat, &l, [&](double s) { return w.scatter(s); }, w.singular_at_zero(), spec);
      if (view.size() - sums.dropped <= p)
        fail(ErrorKind::DegenerateObservation, "too few nonzero pairwise differences");
      return detail::IrlsStep{detail::from_upper(sums.acc, inv_pairs), 0.0, sums.dropped};
    };
    r = detail::run_irls(detail::irls_start(v0), inner, step);
    if (!r.converged)
      throw ConvergenceFailure(spec_tag(inner) + " did not converge in " + std::to_string(inner.irls.max_iter) +
                                   " iterations",
                               [&] {
                                 auto last = r;
                                 last.location = Vector(p, 0.0);
                                 return last;
                               }());
  }
  r.location = Vector(p, 0.0);
  return r;
}

/// sCAU, sHUB or sTYL (the last is Duembgen's shape matrix).
inline ScatterResult symmetrized_named(std::string_view name, const DataMatrix& x, const IRLSSettings& settings = {},
                                       double huber_q = 0.7) {
  SymmetrizedSpec spec;
  if (name == "sCAU") spec.inner = ScatterSpec::of(Family::m_cauchy);
  else if (name == "sHUB") spec.inner = ScatterSpec::of(Family::m_huber);
  else if (name == "sTYL") spec.inner = ScatterSpec::of(Family::tyler);
  else fail(ErrorKind::InvalidInput, "unknown symmetrized estimator: " + std::string(name));
  spec.inner.irls = settings;
  spec.inner.q = huber_q;
  return symmetrized_estimate(x, spec);
}

}  // namespace robscatter
