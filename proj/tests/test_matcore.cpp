#include <gtest/gtest.h>

#include "robscatter/matcore.hpp"
#include "robscatter/randgen.hpp"

using namespace robscatter;

namespace {

SymMatrix random_sym(std::size_t p, std::uint64_t seed) {
  Rng rng(Seed{seed});
  Matrix m(p, p);
  for (double& v : m.data()) v = rng.normal();
  return SymMatrix(m + m.transpose());
}

SymMatrix random_spd(std::size_t p, std::uint64_t seed) {
  Rng rng(Seed{seed});
  Matrix g(p, p);
  for (double& v : g.data()) v = rng.normal();
  return SymMatrix(g * g.transpose() + Matrix::identity(p) * 0.1);
}

}  // namespace

TEST(SymMatrix, StorageIsSymmetric) {
  SymMatrix s(3);
  s.set(0, 2, 1.5);
  EXPECT_EQ(s(2, 0), 1.5);
  const SymMatrix avg(Matrix{{1, 2}, {4, 1}});
  EXPECT_EQ(avg(0, 1), 3.0);
  EXPECT_EQ(avg(1, 0), 3.0);
}

TEST(EigSym, Identity) {
  const auto e = eig_sym(SymMatrix::identity(3));
  for (double v : e.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(EigSym, DiagonalWithSignConvention) {
  const auto e = eig_sym(SymMatrix::diagonal({1.0, 4.0}));
  EXPECT_DOUBLE_EQ(e.values[0], 4.0);
  EXPECT_DOUBLE_EQ(e.values[1], 1.0);
  EXPECT_DOUBLE_EQ(e.vectors(1, 0), 1.0);  // e2 first
  EXPECT_DOUBLE_EQ(e.vectors(0, 1), 1.0);
}

TEST(EigSym, TwoByTwoCharacteristicPolynomial) {
  // lambda^2 - 4 lambda + 3 = 0
  const auto e = eig_sym(SymMatrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(e.values[0], 3.0, 1e-14);
  EXPECT_NEAR(e.values[1], 1.0, 1e-14);
}

TEST(EigSym, RoundTripAndOrthonormality) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t p = 1 + seed % 9;
    const SymMatrix m = random_sym(p, seed);
    const auto e = eig_sym(m);
    const Matrix rec = e.vectors * Matrix::diagonal(e.values) * e.vectors.transpose();
    EXPECT_LE(max_abs(rec - m.matrix()), 1e-10 * max_abs(m));
    EXPECT_LE(max_abs(e.vectors.transpose() * e.vectors - Matrix::identity(p)), 1e-12);
    for (std::size_t k = 0; k + 1 < p; ++k) EXPECT_GE(e.values[k], e.values[k + 1]);
    for (std::size_t k = 0; k < p; ++k) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < p; ++i)
        if (std::abs(e.vectors(i, k)) > std::abs(e.vectors(arg, k))) arg = i;
      EXPECT_GT(e.vectors(arg, k), 0.0);
    }
  }
}

TEST(EigSym, RejectsNonFinite) {
  SymMatrix m(2);
  m.set(0, 1, std::numeric_limits<double>::quiet_NaN());
  try {
    eig_sym(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(InvSqrt, KnownCases) {
  EXPECT_LE(max_abs(inv_sqrt(SymMatrix::identity(4)).matrix() - Matrix::identity(4)), 1e-15);
  const SymMatrix r = inv_sqrt(SymMatrix::diagonal({4.0, 9.0}));
  EXPECT_NEAR(r(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(r(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(r(0, 1), 0.0);
  const SymMatrix m{{2, 1}, {1, 2}};
  const SymMatrix q = inv_sqrt(m);
  EXPECT_LE(max_abs(q.matrix() * m.matrix() * q.matrix() - Matrix::identity(2)), 1e-8);
}

TEST(InvSqrt, RandomSpdAndRootRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SymMatrix m = random_spd(2 + seed % 6, seed);
    const SymMatrix r = inv_sqrt(m);
    EXPECT_LE(max_abs(r.matrix() * m.matrix() * r.matrix() - Matrix::identity(m.dim())), 1e-8);
    const SymMatrix root = invert(r);
    EXPECT_LE(max_abs(root.matrix() * root.matrix() - m.matrix()), 1e-8 * max_abs(m));
  }
}

TEST(InvSqrt, SingularThrows) {
  try {
    inv_sqrt(SymMatrix{{1, 1}, {1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularMatrix);
  }
  EXPECT_THROW(invert(SymMatrix::diagonal({1.0, 0.0})), Error);
}

TEST(Invert, KnownCases) {
  EXPECT_LE(max_abs(invert(SymMatrix::identity(3)).matrix() - Matrix::identity(3)), 1e-15);
  const SymMatrix d = invert(SymMatrix::diagonal({2.0, 5.0}));
  EXPECT_NEAR(d(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(d(1, 1), 0.2, 1e-15);
  const SymMatrix m = random_spd(5, 7);
  EXPECT_LE(max_abs(invert(m).matrix() * m.matrix() - Matrix::identity(5)), 1e-8);
}

TEST(Invert, BlockTriangularStructure) {
  // V = [[I, A], [0, I]] diag(D, M) [[I, 0], [A', I]]: the inverse has
  // upper-left block D^-1 and off-diagonal block -D^-1 A.
  const Matrix a{{0.3, -1.2}, {2.0, 0.5}};
  const Vector dvals{1.5, 0.7};
  const Matrix m{{2.0, 0.4}, {0.4, 1.0}};
  Matrix u = Matrix::identity(4), core(4, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    core(i, i) = dvals[i];
    for (std::size_t j = 0; j < 2; ++j) {
      u(i, 2 + j) = a(i, j);
      core(2 + i, 2 + j) = m(i, j);
    }
  }
  const SymMatrix v(u * core * u.transpose());
  const SymMatrix prec = invert(v);
  EXPECT_NEAR(prec(0, 1), 0.0, 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(prec(i, i), 1.0 / dvals[i], 1e-12);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(prec(i, 2 + j), -a(i, j) / dvals[i], 1e-12);
  }
}

TEST(PseudoCorrelation, Cases) {
  EXPECT_EQ(pseudo_correlation(SymMatrix::diagonal({2.0, 3.0, 5.0}), 0, 2), 0.0);
  const SymMatrix mve_shape = SymMatrix{{4, -2}, {-2, 4}} * (1.0 / std::sqrt(3.0));
  EXPECT_NEAR(pseudo_correlation(mve_shape, 0, 1), -0.5, 1e-15);
  EXPECT_NEAR(pseudo_correlation(SymMatrix{{22.5625, 4.5}, {4.5, 22.5625}}, 0, 1), 0.19945, 1e-5);
}

TEST(PseudoCorrelation, ScaleInvariantSymmetricBounded) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const SymMatrix v = random_spd(4, seed);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) {
        const double r = pseudo_correlation(v, j, k);
        EXPECT_LE(std::abs(r), 1.0);
        EXPECT_EQ(r, pseudo_correlation(v, k, j));
        EXPECT_NEAR(r, pseudo_correlation(v * 7.25, j, k), 1e-15);
      }
  }
}

TEST(PseudoCorrelation, ZeroDiagonal) {
  try {
    pseudo_correlation(SymMatrix::diagonal({0.0, 1.0}), 0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateScale);
  }
}

TEST(Mahalanobis, Cases) {
  const Vector zero{0.0, 0.0};
  EXPECT_EQ(mahalanobis_sq(zero, zero, SymMatrix::identity(2)), 0.0);
  EXPECT_DOUBLE_EQ(mahalanobis_sq(Vector{1.0, 0.0}, zero, SymMatrix::identity(2)), 1.0);
  EXPECT_NEAR(mahalanobis_sq(Vector{1.0, 1.0}, zero, invert(SymMatrix{{2, 1}, {1, 2}})), 2.0 / 3.0, 1e-14);
  EXPECT_THROW(mahalanobis_sq(Vector{1.0}, zero, SymMatrix::identity(2)), Error);
}

TEST(Mahalanobis, AffineConsistent) {
  const SymMatrix v = random_spd(3, 3);
  const Matrix a{{1.0, 0.5, 0.0}, {-0.3, 2.0, 0.1}, {0.0, 0.4, 0.7}};
  const Vector b{1.0, -2.0, 0.5}, x{0.3, -1.1, 2.2}, c{0.1, 0.2, 0.3};
  Vector ax = a * x, ac = a * c;
  for (std::size_t j = 0; j < 3; ++j) {
    ax[j] += b[j];
    ac[j] += b[j];
  }
  EXPECT_NEAR(mahalanobis_sq(x, c, invert(v)), mahalanobis_sq(ax, ac, invert(congruence(a, v))), 1e-8);
}

TEST(Cholesky, LogDet) {
  const SymMatrix m{{4, 2}, {2, 3}};
  EXPECT_NEAR(log_det(m), std::log(8.0), 1e-14);
  EXPECT_THROW(cholesky(SymMatrix{{1, 1}, {1, 1}}), Error);
}
