#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "stiefel/matrix.hpp"

namespace stiefel {

constexpr Real machine_epsilon = std::numeric_limits<Real>::epsilon();

/// C = A * B. Cache-blocked; the summation order is fixed, so results are
/// bitwise reproducible for a given build.
template <ScalarType T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

/// B(j, i) = conj(A(i, j)); plain transpose for real matrices.
template <ScalarType T>
Matrix<T> conj_transpose(const Matrix<T>& a);

template <ScalarType T>
Real frobenius_norm(const Matrix<T>& a);

/// Re tr(A^H B), the real inner product matching the Frobenius norm.
template <ScalarType T>
Real inner_product(const Matrix<T>& a, const Matrix<T>& b);

/// Packed LU factors of a square matrix with row pivoting: P A = L U.
template <ScalarType T>
struct LuFactors {
  Matrix<T> packed;                ///< unit-lower L below the diagonal, U on and above
  std::vector<std::size_t> pivot;  ///< row i of P A is row pivot[i] of A
  int permutation_sign = 1;
};

/// LU with partial pivoting. Throws SingularMatrix when a pivot is below
/// n * eps * max|A|.
template <ScalarType T>
LuFactors<T> lu_factor(const Matrix<T>& a);

/// Solves A X = B given the factors of A.
template <ScalarType T>
Matrix<T> lu_solve(const LuFactors<T>& lu, const Matrix<T>& b);

/// X with A X = B, via LU with partial pivoting. Never forms A^{-1}.
template <ScalarType T>
Matrix<T> solve_linear(const Matrix<T>& a, const Matrix<T>& b);

/// det(A) from the LU factors.
template <ScalarType T>
T determinant(const Matrix<T>& a);

template <ScalarType T>
struct QrFactors {
  Matrix<T> q;  ///< n x p, orthonormal columns
  Matrix<T> r;  ///< p x p, upper triangular, real positive diagonal
};

/// Thin Householder QR of an n x p matrix (n >= p). The diagonal of R is
/// made real and positive, which pins the factorization down uniquely.
/// Throws RankDeficient when a column is dependent to working precision.
template <ScalarType T>
QrFactors<T> qr_decompose(const Matrix<T>& a);

}  // namespace stiefel
