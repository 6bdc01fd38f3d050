#include <gtest/gtest.h>

#include <cmath>

#include "stiefel/linalg.hpp"
#include "stiefel/rng.hpp"
#include "test_support.hpp"

using namespace stiefel;
using stiefel::testing::max_abs_diff;
using stiefel::testing::naive_adjoint;
using stiefel::testing::naive_matmul;

template <class T>
class LinalgTyped : public ::testing::Test {};
using Scalars = ::testing::Types<Real, Complex>;
TYPED_TEST_SUITE(LinalgTyped, Scalars);

TYPED_TEST(LinalgTyped, MatmulMatchesTripleLoop) {
  using T = TypeParam;
  Rng rng(3);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 4, 2}, {7, 5, 9}, {33, 17, 20}, {70, 70, 70}}) {
    auto a = gaussian_matrix<T>(rng, m, k);
    auto b = gaussian_matrix<T>(rng, k, n);
    EXPECT_LE(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12 * static_cast<Real>(k));
  }
}

TYPED_TEST(LinalgTyped, MatmulAssociative) {
  using T = TypeParam;
  Rng rng(4);
  auto a = gaussian_matrix<T>(rng, 10, 10);
  auto b = gaussian_matrix<T>(rng, 10, 10);
  auto c = gaussian_matrix<T>(rng, 10, 10);
  Real diff = frobenius_norm(matmul(matmul(a, b), c) - matmul(a, matmul(b, c)));
  EXPECT_LE(diff, 1e-10 * frobenius_norm(a) * frobenius_norm(b) * frobenius_norm(c));
}

TYPED_TEST(LinalgTyped, AdjointMatchesLoopAndReversesProducts) {
  using T = TypeParam;
  Rng rng(5);
  auto a = gaussian_matrix<T>(rng, 6, 4);
  auto b = gaussian_matrix<T>(rng, 4, 3);
  EXPECT_EQ(conj_transpose(a), naive_adjoint(a));
  EXPECT_EQ(conj_transpose(conj_transpose(a)), a);
  EXPECT_LE(max_abs_diff(conj_transpose(matmul(a, b)), matmul(conj_transpose(b), conj_transpose(a))), 1e-12);
}

TYPED_TEST(LinalgTyped, InnerProductIsRealTraceOfAdjointProduct) {
  using T = TypeParam;
  Rng rng(6);
  auto a = gaussian_matrix<T>(rng, 5, 3);
  auto b = gaussian_matrix<T>(rng, 5, 3);
  auto prod = naive_matmul(naive_adjoint(a), b);
  Real trace = 0;
  for (std::size_t i = 0; i < 3; ++i) trace += real_part(prod(i, i));
  EXPECT_NEAR(inner_product(a, b), trace, 1e-12);
  EXPECT_NEAR(inner_product(a, a), frobenius_norm(a) * frobenius_norm(a), 1e-12);
}

TEST(Linalg, MatmulSmallExamples) {
  EXPECT_EQ(matmul(RealMatrix::identity(2), RealMatrix::identity(2)), RealMatrix::identity(2));
  RealMatrix rot{{0, -1}, {1, 0}};
  RealMatrix col{{1}, {0}};
  EXPECT_EQ(matmul(rot, col), (RealMatrix{{0}, {1}}));
}

TEST(Linalg, MatmulInnerDimensionMismatch) {
  EXPECT_THROW(matmul(RealMatrix(2, 3), RealMatrix(2, 3)), PreconditionError);
}

TEST(Linalg, ConjTransposeExamples) {
  EXPECT_EQ(conj_transpose(RealMatrix{{1, 2, 3}}), (RealMatrix{{1}, {2}, {3}}));
  ComplexMatrix z{{Complex(1, 2)}};
  EXPECT_EQ(conj_transpose(z), (ComplexMatrix{{Complex(1, -2)}}));
}

TEST(Linalg, FrobeniusExamples) {
  EXPECT_EQ(frobenius_norm(RealMatrix(3, 2)), 0.0);
  EXPECT_NEAR(frobenius_norm(RealMatrix::identity(3)), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(frobenius_norm(ComplexMatrix{{Complex(3, 4)}}), 5.0, 1e-15);
}

TEST(Linalg, FrobeniusDoesNotOverflow) {
  RealMatrix big{{1e200, 1e200}};
  EXPECT_NEAR(frobenius_norm(big) / 1e200, std::sqrt(2.0), 1e-14);
}

TEST(Linalg, SolveIdentity) {
  Rng rng(8);
  auto b = gaussian_matrix<Real>(rng, 4, 3);
  EXPECT_LE(max_abs_diff(solve_linear(RealMatrix::identity(4), b), b), 0.0);
}

TEST(Linalg, SolveTwoByTwoAgainstAdjugateInverse) {
  RealMatrix a{{1, 1}, {-1, 1}};
  RealMatrix b{{1, -1}, {1, 1}};
  Real det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  RealMatrix inv{{a(1, 1) / det, -a(0, 1) / det}, {-a(1, 0) / det, a(0, 0) / det}};
  auto expected = naive_matmul(inv, b);
  auto x = solve_linear(a, b);
  EXPECT_LE(max_abs_diff(x, expected), 1e-15);
  EXPECT_LE(max_abs_diff(x, RealMatrix{{0, -1}, {1, 0}}), 1e-15);
}

TEST(Linalg, SolveSingularThrows) {
  EXPECT_THROW(solve_linear(RealMatrix{{1, 2}, {2, 4}}, RealMatrix::identity(2)), SingularMatrix);
  EXPECT_THROW(solve_linear(RealMatrix(3, 3), RealMatrix(3, 1)), SingularMatrix);
}

TEST(Linalg, SolveShapeChecks) {
  EXPECT_THROW(solve_linear(RealMatrix(2, 3), RealMatrix(2, 1)), PreconditionError);
  EXPECT_THROW(solve_linear(RealMatrix::identity(2), RealMatrix(3, 1)), PreconditionError);
}

TYPED_TEST(LinalgTyped, SolveResidualOnRandomSystems) {
  using T = TypeParam;
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 2 + static_cast<std::size_t>(trial % 15);
    auto a = gaussian_matrix<T>(rng, n, n) * T{0.3 / std::sqrt(static_cast<Real>(n))};
    a += Matrix<T>::identity(n);
    auto b = gaussian_matrix<T>(rng, n, 3);
    auto x = solve_linear(a, b);
    Real residual = frobenius_norm(naive_matmul(a, x) - b);
    EXPECT_LE(residual, 1e3 * machine_epsilon * static_cast<Real>(n) * frobenius_norm(b));
  }
}

TYPED_TEST(LinalgTyped, SolveResidualAcrossBlockBoundaries) {
  using T = TypeParam;
  Rng rng(13);
  for (std::size_t n : {63u, 64u, 65u, 150u}) {
    auto a = gaussian_matrix<T>(rng, n, n);
    auto b = gaussian_matrix<T>(rng, n, 70);
    auto x = solve_linear(a, b);
    Real residual = frobenius_norm(naive_matmul(a, x) - b);
    EXPECT_LE(residual, 1e3 * machine_epsilon * static_cast<Real>(n) * frobenius_norm(a) * frobenius_norm(x)) << n;
    EXPECT_LE(residual, 1e-8 * frobenius_norm(b)) << n;
  }
}

TEST(Linalg, DeterminantOfPermutedTriangularProduct) {
  // det(P L U) with known factors; rows are shuffled so pivoting kicks in.
  const std::size_t n = 100;
  RealMatrix l = RealMatrix::identity(n), u = RealMatrix::identity(n);
  Rng rng(14);
  Real expected = 1;
  for (std::size_t i = 0; i < n; ++i) {
    u(i, i) = 0.5 + rng.uniform();
    expected *= u(i, i);
    for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.1 * rng.normal();
    for (std::size_t j = i + 1; j < n; ++j) u(i, j) = 0.1 * rng.normal();
  }
  auto a = naive_matmul(l, u);
  std::swap_ranges(a.row(0).begin(), a.row(0).end(), a.row(n - 1).begin());
  EXPECT_NEAR(determinant(a) / -expected, 1.0, 1e-9);
}

TEST(Linalg, LuPermutationSignAndDeterminant) {
  RealMatrix a{{1, 2}, {3, 4}};
  EXPECT_NEAR(determinant(a), -2.0, 1e-14);
  RealMatrix swap{{0, 1}, {1, 0}};
  auto lu = lu_factor(swap);
  EXPECT_EQ(lu.permutation_sign, -1);
  EXPECT_NEAR(determinant(swap), -1.0, 1e-15);
  EXPECT_NEAR(std::abs(determinant(ComplexMatrix{{Complex(0, 2)}}) - Complex(0, 2)), 0.0, 1e-15);
}

TEST(Linalg, LuSolveReusesFactors) {
  Rng rng(10);
  auto a = gaussian_matrix<Real>(rng, 6, 6) + RealMatrix::identity(6) * 4.0;
  auto lu = lu_factor(a);
  for (int i = 0; i < 3; ++i) {
    auto b = gaussian_matrix<Real>(rng, 6, 2);
    EXPECT_LE(frobenius_norm(naive_matmul(a, lu_solve(lu, b)) - b), 1e-12 * frobenius_norm(b));
  }
}

TEST(Linalg, QrOfOrthonormalInputs) {
  auto e = RealMatrix::identity(5, 3);
  auto qr = qr_decompose(e);
  EXPECT_LE(max_abs_diff(qr.q, e), 1e-15);
  EXPECT_LE(max_abs_diff(qr.r, RealMatrix::identity(3)), 1e-15);

  auto two = RealMatrix::identity(2) * 2.0;
  auto qr2 = qr_decompose(two);
  EXPECT_LE(max_abs_diff(qr2.q, RealMatrix::identity(2)), 1e-15);
  EXPECT_LE(max_abs_diff(qr2.r, two), 1e-15);
}

TYPED_TEST(LinalgTyped, QrReconstructsWithOrthonormalQ) {
  using T = TypeParam;
  Rng rng(11);
  auto a = gaussian_matrix<T>(rng, 8, 3);
  auto qr = qr_decompose(a);
  auto gram = naive_matmul(naive_adjoint(qr.q), qr.q);
  EXPECT_LE(max_abs_diff(gram, Matrix<T>::identity(3)), 1e-12);
  EXPECT_LE(max_abs_diff(naive_matmul(qr.q, qr.r), a), 1e-12);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GT(real_part(qr.r(i, i)), 0.0);
    if constexpr (is_complex<T>::value) EXPECT_NEAR(qr.r(i, i).imag(), 0.0, 1e-14);
    for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(qr.r(i, j), T{});
  }
}

TEST(Linalg, QrIsUniqueUnderPositiveColumnScaling) {
  Rng rng(12);
  auto a = gaussian_matrix<Real>(rng, 7, 4);
  auto scaled = a;
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 4; ++j) scaled(i, j) *= static_cast<Real>(j + 1);
  }
  EXPECT_LE(max_abs_diff(qr_decompose(a).q, qr_decompose(scaled).q), 1e-12);
}

TEST(Linalg, QrRankDeficientThrows) {
  RealMatrix a{{1, 2}, {2, 4}, {3, 6}};
  EXPECT_THROW(qr_decompose(a), RankDeficient);
  EXPECT_THROW(qr_decompose(RealMatrix(4, 2)), RankDeficient);
  EXPECT_THROW(qr_decompose(RealMatrix(2, 3)), PreconditionError);
}
