#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "stiefel/manifold.hpp"
#include "test_support.hpp"

using namespace stiefel;
using stiefel::testing::max_abs_diff;
using stiefel::testing::naive_adjoint;
using stiefel::testing::naive_matmul;

namespace {

constexpr Real kLoose = std::numeric_limits<Real>::infinity();

// Generator formed literally from its definition, with explicit n x n products.
template <class T>
Matrix<T> reference_skew(const Matrix<T>& x, const Matrix<T>& z) {
  auto xh = naive_adjoint(x);
  auto what = naive_matmul(z, xh) - naive_matmul(x, naive_matmul(naive_matmul(xh, z), xh)) * T{0.5};
  return what - naive_adjoint(what);
}

template <class T>
Matrix<T> reference_projection(const Matrix<T>& x, const Matrix<T>& z) {
  auto xh = naive_adjoint(x);
  auto sym = naive_matmul(xh, z) + naive_matmul(naive_adjoint(z), x);
  return z - naive_matmul(x, sym) * T{0.5};
}

template <class T>
Real skewness(const Matrix<T>& w) {
  return frobenius_norm(w + naive_adjoint(w));
}

}  // namespace

template <class T>
class ManifoldTyped : public ::testing::Test {};
using Scalars = ::testing::Types<Real, Complex>;
TYPED_TEST_SUITE(ManifoldTyped, Scalars);

TEST(Manifold, OrthonormalityErrorExamples) {
  EXPECT_EQ(orthonormality_error(RealMatrix::identity(5, 3)), 0.0);
  EXPECT_NEAR(orthonormality_error(RealMatrix{{2}, {0}}), 3.0, 1e-15);
}

TEST(Manifold, PointValidation) {
  EXPECT_NO_THROW(StiefelPoint<Real>(RealMatrix::identity(4, 2)));
  EXPECT_THROW(StiefelPoint<Real>(RealMatrix{{2}, {0}}), NotOrthonormal);
  EXPECT_NO_THROW(StiefelPoint<Real>(RealMatrix{{2}, {0}}, kLoose));
  EXPECT_THROW(StiefelPoint<Real>(RealMatrix::identity(2, 3)), PreconditionError);
}

TEST(Manifold, UnboundedToleranceStillRejectsNonFinite) {
  RealMatrix bad{{std::nan("")}, {0}};
  EXPECT_THROW(StiefelPoint<Real>(bad, kLoose), NotOrthonormal);
}

TEST(Manifold, TangentAndSkewValidation) {
  StiefelPoint<Real> x(RealMatrix{{1}, {0}});
  EXPECT_NO_THROW(TangentVector<Real>(x, RealMatrix{{0}, {1}}));
  EXPECT_THROW(TangentVector<Real>(x, RealMatrix{{1}, {0}}), PreconditionError);
  EXPECT_THROW(SkewOperator<Real>(RealMatrix{{1, 0}, {0, 0}}), PreconditionError);
  EXPECT_THROW(SkewOperator<Real>(RealMatrix(2, 3)), PreconditionError);
  EXPECT_NO_THROW(SkewOperator<Complex>(ComplexMatrix{{Complex(0, 1)}}));
}

TEST(Manifold, SkewOfTwoDimensionalExample) {
  StiefelPoint<Real> x(RealMatrix{{1}, {0}});
  auto w = build_skew(x, RealMatrix{{0}, {1}});
  EXPECT_LE(max_abs_diff(w.mat(), RealMatrix{{0, -1}, {1, 0}}), 1e-15);
}

TYPED_TEST(ManifoldTyped, SkewVanishesAlongThePoint) {
  using T = TypeParam;
  Rng rng(1);
  auto x = random_point<T>(rng, 6, 3);
  EXPECT_LE(build_skew(x, x.mat()).norm(), 1e-14);
}

TYPED_TEST(ManifoldTyped, SkewMatchesDefinitionAndIsSkew) {
  using T = TypeParam;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    auto x = random_point<T>(rng, 7, 1 + static_cast<std::size_t>(i % 7));
    auto z = gaussian_matrix<T>(rng, 7, x.p());
    auto w = build_skew(x, z);
    EXPECT_LE(max_abs_diff(w.mat(), reference_skew(x.mat(), z)), 1e-12);
    EXPECT_LE(skewness(w.mat()), 1e-12);
  }
}

TEST(Manifold, TangentProjectionExample) {
  StiefelPoint<Real> x(RealMatrix{{1}, {0}});
  auto v = tangent_project(x, RealMatrix{{3}, {4}});
  EXPECT_LE(max_abs_diff(v.mat(), RealMatrix{{0}, {4}}), 1e-15);
}

TYPED_TEST(ManifoldTyped, ProjectionIdentityAndIdempotence) {
  using T = TypeParam;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    std::size_t n = 2 + static_cast<std::size_t>(i % 9);
    std::size_t p = 1 + static_cast<std::size_t>(i % n);
    auto x = random_point<T>(rng, n, p);
    auto z = gaussian_matrix<T>(rng, n, p);
    auto v = tangent_project(x, z).mat();
    EXPECT_LE(max_abs_diff(v, reference_projection(x.mat(), z)), 1e-10);
    EXPECT_LE(max_abs_diff(tangent_project(x, v).mat(), v), 1e-10);
    auto gram = naive_matmul(naive_adjoint(v), x.mat()) + naive_matmul(naive_adjoint(x.mat()), v);
    EXPECT_LE(frobenius_norm(gram), 1e-10);
  }
}

TYPED_TEST(ManifoldTyped, ProjectionOfPointIsZero) {
  using T = TypeParam;
  Rng rng(4);
  auto x = random_point<T>(rng, 5, 2);
  EXPECT_LE(frobenius_norm(tangent_project(x, x.mat()).mat()), 1e-14);
}

TEST(Manifold, ClosedCayleyRotationExample) {
  StiefelPoint<Real> x(RealMatrix{{1}, {0}});
  SkewOperator<Real> w(RealMatrix{{0, -1}, {1, 0}});
  auto y = cayley_closed(x, w, 2.0);
  EXPECT_LE(max_abs_diff(y.mat(), RealMatrix{{0}, {1}}), 1e-15);
  // In the plane the curve is a rotation by 2 atan(alpha / 2).
  for (Real alpha : {0.1, 0.7, 3.0}) {
    Real phi = 2 * std::atan(alpha / 2);
    auto ya = cayley_closed(x, w, alpha);
    EXPECT_NEAR(ya.mat()(0, 0), std::cos(phi), 1e-15);
    EXPECT_NEAR(ya.mat()(1, 0), std::sin(phi), 1e-15);
  }
}

TYPED_TEST(ManifoldTyped, ClosedCayleyAtZeroIsIdentity) {
  using T = TypeParam;
  Rng rng(5);
  auto x = random_point<T>(rng, 6, 2);
  auto w = build_skew(x, gaussian_matrix<T>(rng, 6, 2));
  EXPECT_EQ(cayley_closed(x, w, 0.0).mat(), x.mat());
}

TYPED_TEST(ManifoldTyped, ClosedCayleySolvesItsDefiningSystem) {
  using T = TypeParam;
  Rng rng(6);
  std::size_t n = 9;
  auto x = random_point<T>(rng, n, 4);
  auto w = build_skew(x, gaussian_matrix<T>(rng, n, 4));
  for (Real alpha : {0.01, 0.1, 1.0, 10.0}) {
    auto y = cayley_closed(x, w, alpha);
    auto half = w.mat() * T{alpha / 2};
    auto lhs = naive_matmul(Matrix<T>::identity(n) - half, y.mat());
    auto rhs = naive_matmul(Matrix<T>::identity(n) + half, x.mat());
    EXPECT_LE(frobenius_norm(lhs - rhs), 1e-12 * (1 + alpha * w.norm()));
    EXPECT_LE(orthonormality_error(y.mat()), 1e3 * machine_epsilon * static_cast<Real>(n));
  }
}

TYPED_TEST(ManifoldTyped, RawClosedCayleyMatchesCheckedVersion) {
  using T = TypeParam;
  Rng rng(12);
  auto x = random_point<T>(rng, 7, 3);
  auto w = build_skew(x, gaussian_matrix<T>(rng, 7, 3));
  EXPECT_EQ(cayley_closed_matrix(x, w, 0.3), cayley_closed(x, w, 0.3).mat());
  EXPECT_EQ(cayley_closed_matrix(x, w, 0.0), x.mat());
}

TYPED_TEST(ManifoldTyped, IterativeCayleyConvergesToClosedForm) {
  using T = TypeParam;
  Rng rng(7);
  auto x = random_point<T>(rng, 8, 3);
  auto w = build_skew(x, gaussian_matrix<T>(rng, 8, 3));
  Real alpha = adaptive_alpha(1.0, w, 0.5, 1e-8);
  auto closed = cayley_closed(x, w, alpha);
  auto y0 = x.mat() + matmul(w.mat(), x.mat()) * T{alpha};
  auto y = cayley_iterative(x, w, alpha, 50, y0);
  EXPECT_LE(max_abs_diff(y, closed.mat()), 1e-12);
}

TYPED_TEST(ManifoldTyped, IterativeCayleyWithZeroGeneratorStaysPut) {
  using T = TypeParam;
  Rng rng(8);
  auto x = random_point<T>(rng, 5, 3);
  auto y = cayley_iterative(x, SkewOperator<T>::zero(5), 0.3, 2, x.mat());
  EXPECT_EQ(y, x.mat());
}

TEST(Manifold, IterativeCayleyErrorContracts) {
  Rng rng(9);
  auto x = random_point<Real>(rng, 10, 3);
  auto w = build_skew(x, gaussian_matrix<Real>(rng, 10, 3));
  Real alpha = adaptive_alpha(1.0, w, 0.5, 1e-8);
  auto closed = cayley_closed(x, w, alpha).mat();
  auto y0 = x.mat() + matmul(w.mat(), x.mat()) * alpha;
  Real previous = frobenius_norm(y0 - closed);
  for (std::size_t s = 1; s <= 5; ++s) {
    Real r = frobenius_norm(cayley_iterative(x, w, alpha, s, y0) - closed);
    EXPECT_LE(r, alpha * w.norm() / 2 * previous * (1 + 1e-9) + 1e-15);
    previous = r;
  }
}

TEST(Manifold, AdaptiveAlphaExamples) {
  auto w = SkewOperator<Real>(RealMatrix{{0, -1}, {1, 0}});
  Real fro = std::sqrt(2.0);
  EXPECT_NEAR(adaptive_alpha(0.1, w, 0.5, 1e-8), 0.1, 0);
  EXPECT_NEAR(adaptive_alpha(10.0, w, 0.5, 1e-8), 1.0 / (fro + 1e-8), 1e-15);
  EXPECT_EQ(adaptive_alpha(0.3, SkewOperator<Real>::zero(3), 0.5, 1e-8), 0.3);
  EXPECT_THROW(adaptive_alpha(0.1, w, 1.0, 1e-8), PreconditionError);
  EXPECT_THROW(adaptive_alpha(0.1, w, 0.0, 1e-8), PreconditionError);
  EXPECT_THROW(adaptive_alpha(-0.1, w, 0.5, 1e-8), PreconditionError);
}

TEST(Manifold, RandomPointSeeded) {
  Rng a(42), b(42);
  auto x = random_point<Real>(a, 4, 2);
  EXPECT_LE(orthonormality_error(x.mat()), 1e-12);
  EXPECT_EQ(x.mat(), random_point<Real>(b, 4, 2).mat());

  Rng c(1);
  auto u = random_point<Complex>(c, 8, 8);
  EXPECT_LE(orthonormality_error(u.mat()), 1e-12);
}

TEST(Manifold, RetractionCheckHandCase) {
  StiefelPoint<Real> x(RealMatrix{{1}, {0}});
  SkewOperator<Real> w(RealMatrix{{0, -1}, {1, 0}});
  auto check = retraction_check(x, w);
  EXPECT_EQ(check.c0, 0.0);
  EXPECT_LE(check.c1, 1e-4);
}

TYPED_TEST(ManifoldTyped, RetractionCheckIsFirstOrder) {
  using T = TypeParam;
  Rng rng(10);
  auto x = random_point<T>(rng, 12, 4);
  auto w = build_skew(x, gaussian_matrix<T>(rng, 12, 4));
  w = w.scaled(1.0 / w.norm());
  auto check = retraction_check(x, w);
  EXPECT_LE(check.c0, 1e-14);
  EXPECT_GE(check.order_ratio(), 1.8);
  EXPECT_LE(check.order_ratio(), 2.2);

  auto zero = retraction_check(x, SkewOperator<T>::zero(12));
  EXPECT_EQ(zero.c0, 0.0);
  EXPECT_EQ(zero.c1, 0.0);
}

TEST(Manifold, ReorthonormalizeKeepsOrthonormalPoint) {
  Rng rng(11);
  auto x = random_point<Real>(rng, 6, 3);
  EXPECT_LE(max_abs_diff(reorthonormalize(x.mat()).mat(), x.mat()), 1e-12);
}

TEST(Manifold, ReorthonormalizeFixesScaledColumns) {
  RealMatrix a{{3, 0}, {0, 0.5}, {0, 0}};
  auto x = reorthonormalize(a);
  EXPECT_LE(max_abs_diff(x.mat(), RealMatrix::identity(3, 2)), 1e-15);
  RealMatrix zero_col{{1, 0}, {0, 0}, {0, 0}};
  EXPECT_THROW(reorthonormalize(zero_col), RankDeficient);
}
