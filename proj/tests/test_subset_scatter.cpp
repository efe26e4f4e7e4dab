#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "robscatter/randgen.hpp"
#include "robscatter/subset_scatter.hpp"

using namespace robscatter;

namespace {

std::vector<Atom> trinomial_square() {
  const double q[3] = {0.48, 0.45, 0.07};
  std::vector<Atom> out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.push_back({Vector{double(i), double(j)}, q[i] * q[j]});
  return out;
}

double exhaustive_mcd_log_det(const DataMatrix& x, std::size_t h) {
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_subset(x.n(), h, [&](std::span<const std::size_t> idx) {
    if (auto ld = subset_log_det(x, idx)) best = std::min(best, *ld);
  });
  return best;
}

double exhaustive_mve_log_volume(const DataMatrix& x, std::size_t h) {
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_subset(x.n(), h, [&](std::span<const std::size_t> idx) {
    if (auto e = min_volume_ellipsoid(detail::rows_of(x, idx))) best = std::min(best, e->log_volume);
  });
  return best;
}

DataMatrix contaminated(std::size_t n, std::size_t p, std::uint64_t seed) {
  auto x = independent_product(std::vector<DistributionSpec>(p, StandardNormal{}), n, Seed{seed});
  Matrix m = x.values();
  for (std::size_t i = 0; i < n / 5; ++i) m(i, 0) += 6.0;
  return DataMatrix(std::move(m));
}

}  // namespace

TEST(MinVolumeEllipsoid, TriangleIsSteinerEllipse) {
  const auto e = min_volume_ellipsoid(Matrix{{0, 0}, {1, 0}, {0, 1}});
  ASSERT_TRUE(e);
  EXPECT_NEAR(e->shape(0, 0) * 9.0, 4.0, 1e-8);
  EXPECT_NEAR(e->shape(0, 1) * 9.0, -2.0, 1e-8);
  EXPECT_NEAR(e->shape(1, 1) * 9.0, 4.0, 1e-8);
  EXPECT_NEAR(e->center[0], 1.0 / 3.0, 1e-8);
  const SymMatrix inv = invert(e->shape);
  for (const Vector& v : {Vector{0, 0}, Vector{1, 0}, Vector{0, 1}})
    EXPECT_NEAR(mahalanobis_sq(v, e->center, inv), 1.0, 1e-8);
}

TEST(MinVolumeEllipsoid, DegenerateAndCoverage) {
  EXPECT_FALSE(min_volume_ellipsoid(Matrix{{0, 0}, {1, 1}, {2, 2}}));
  EXPECT_FALSE(min_volume_ellipsoid(Matrix{{0, 0}, {1, 1}}));
  Rng rng(Seed{3});
  Matrix pts(30, 3);
  for (double& v : pts.data()) v = rng.normal();
  const auto e = min_volume_ellipsoid(pts);
  ASSERT_TRUE(e);
  const SymMatrix inv = invert(e->shape);
  for (std::size_t i = 0; i < pts.rows(); ++i) EXPECT_LE(mahalanobis_sq(pts.row(i), e->center, inv), 1.0 + 1e-9);
}

TEST(Mve, TriangleWithFullCoverage) {
  SubsetSpec s;
  s.h = 3;
  const MveFit fit = mve_fit(DataMatrix{{0, 0}, {1, 0}, {0, 1}}, s);
  EXPECT_TRUE(fit.exact);
  EXPECT_EQ(fit.consistency_factor, 1.0);
  EXPECT_NEAR(fit.raw.shape(0, 0) * 9.0, 4.0, 1e-8);
  EXPECT_NEAR(fit.raw.shape(0, 1) * 9.0, -2.0, 1e-8);
  EXPECT_NEAR(pseudo_correlation(mve(DataMatrix{{0, 0}, {1, 0}, {0, 1}}, s).scatter, 0, 1), -0.5, 1e-8);
}

TEST(Mve, ExactSearchMatchesSubsetEnumeration) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const DataMatrix x = contaminated(16, 2, seed);
    const std::size_t h = 9;
    SubsetSpec s;
    s.h = h;
    const MveFit fit = mve_fit(x, s);
    ASSERT_TRUE(fit.exact);
    const double oracle = exhaustive_mve_log_volume(x, h);
    EXPECT_NEAR(fit.raw.log_volume, oracle, 1e-6 * std::max(1.0, std::abs(oracle))) << seed;
    EXPECT_GE(detail::covered(x, fit.raw), h);
  }
}

TEST(Mve, HeuristicCoversHAndIsEquivariant) {
  const DataMatrix x = contaminated(200, 3, 4);
  const Matrix a{{1.0, 0.5, 0.0}, {0.0, 2.0, -1.0}, {0.3, 0.0, 1.0}};
  const Vector b{1.0, -1.0, 4.0};
  const MveFit f0 = mve_fit(x), f1 = mve_fit(x.affine(a, b));
  EXPECT_FALSE(f0.exact);
  EXPECT_GE(detail::covered(x, f0.raw), f0.h);
  EXPECT_EQ(f0.h, 102u);
  const Matrix expect = a * f0.raw.shape.matrix() * a.transpose();
  EXPECT_LE(max_abs(f1.raw.shape.matrix() - expect), 1e-8 * max_abs(expect));
}

TEST(Mve, NormalConsistency) {
  const SymMatrix sigma{{1.0, 0.5}, {0.5, 2.0}};
  const auto x = sample(MultivariateNormal{Vector{0.0, 0.0}, sigma}, 2000, Seed{5});
  // elemental search converges slowly; only check shape and rough scale
  const auto r = mve(x);
  EXPECT_NEAR(pseudo_correlation(r.scatter, 0, 1), pseudo_correlation(sigma, 0, 1), 0.1);
  EXPECT_NEAR(log_det(r.scatter), log_det(sigma), 0.5);
}

TEST(Mcd, HeuristicMatchesExhaustiveSearch) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DataMatrix x = contaminated(16, 2, 10 + seed);
    SubsetSpec s;
    s.h = 9;
    const auto r = mcd(x, s);
    const double raw = log_det(r.scatter) - 2.0 * std::log(detail::mcd_consistency(9, 16, 2));
    const double oracle = exhaustive_mcd_log_det(x, 9);
    EXPECT_NEAR(raw, oracle, 1e-6 * std::max(1.0, std::abs(oracle))) << seed;
  }
}

TEST(Mcd, ConsistencyFactor) {
  EXPECT_EQ(detail::mcd_consistency(10, 10, 3), 1.0);
  const double c = detail::mcd_consistency(500, 1000, 2);
  // (1/2) / F_4(chi2_2 median)
  EXPECT_NEAR(c, 0.5 / stats::chisq_cdf(4.0, stats::chisq_quantile(2.0, 0.5)), 1e-14);
  const SymMatrix sigma{{1.0, -0.3}, {-0.3, 0.5}};
  const auto x = sample(MultivariateNormal{Vector{2.0, 0.0}, sigma}, 2000, Seed{6});
  EXPECT_LE(max_abs(mcd(x).scatter.matrix() - sigma.matrix()), 0.12);
}

TEST(Mcd, AffineEquivariant) {
  const DataMatrix x = contaminated(120, 3, 7);
  const Matrix a{{2.0, 0.0, 0.1}, {0.4, 1.0, 0.0}, {0.0, -0.5, 0.7}};
  const Vector b{0.0, 3.0, -2.0};
  const auto r0 = mcd(x), r1 = mcd(x.affine(a, b));
  const Matrix expect = a * r0.scatter.matrix() * a.transpose();
  EXPECT_LE(max_abs(r1.scatter.matrix() - expect), 1e-8 * max_abs(expect));
}

TEST(Mcd, RejectsOutliers) {
  const auto r = mcd(contaminated(300, 2, 8));
  EXPECT_LT(std::abs((*r.location)[0]), 0.5);
}

TEST(SubsetSpec, Validation) {
  SubsetSpec s;
  s.h = 2;
  EXPECT_THROW(mcd(contaminated(20, 2, 1), s), Error);
  s.h = 21;
  EXPECT_THROW(mve(contaminated(20, 2, 1), s), Error);
  EXPECT_THROW(mcd(DataMatrix{{1, 2}, {3, 4}}), Error);
}

TEST(Mcd, AllStartsDegenerate) {
  try {
    mcd(DataMatrix{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSubset);
  }
}

TEST(PopulationMve, TrinomialCounterexample) {
  const auto r = population_mve(trinomial_square(), 0.65);
  // atoms in row-major (i, j) order: (0,0)=0, (0,1)=1, (1,0)=3
  EXPECT_EQ(r.selected, (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_NEAR(r.covered_mass, 0.2304 + 0.216 + 0.216, 1e-12);
  const double k = 4.0 / r.shape(0, 0);
  EXPECT_NEAR(r.shape(0, 1) * k, -2.0, 1e-6);
  EXPECT_NEAR(r.shape(1, 1) * k, 4.0, 1e-6);
  EXPECT_NEAR(pseudo_correlation(r.scatter, 0, 1), -0.5, 1e-6);
}

TEST(PopulationMve, Errors) {
  std::vector<Atom> many;
  for (int k = 0; k < 21; ++k) many.push_back({Vector{double(k), double(k * k)}, 1.0 / 21.0});
  try {
    population_mve(many, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
  try {
    population_mve({{Vector{0.0, 0.0}, 0.7}, {Vector{1.0, 1.0}, 0.3}}, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSubset);
  }
}

TEST(Mve, TrinomialSampleReproducesCounterexample) {
  const auto x = independent_product({Discrete{{0, 1, 2}, {0.48, 0.45, 0.07}}, Discrete{{0, 1, 2}, {0.48, 0.45, 0.07}}},
                                     5000, Seed{9});
  EXPECT_GT(std::abs(pseudo_correlation(mve(x).scatter, 0, 1)), 0.3);
}
