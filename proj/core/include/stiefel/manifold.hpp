#pragma once

#include <cstddef>
#include <limits>

#include "stiefel/linalg.hpp"
#include "stiefel/matrix.hpp"
#include "stiefel/rng.hpp"

namespace stiefel {

/// ||X^H X - I_p||_F for an n x p matrix with n >= p.
template <ScalarType T>
Real orthonormality_error(const Matrix<T>& x);

/// A point on St(n, p): an n x p matrix with orthonormal columns.
///
/// The matrix is checked against `ortho_tol` on construction and a
/// NotOrthonormal error is raised if it has drifted further. Long runs that
/// accumulate drift on purpose (diagnostics) pass a looser tolerance; code
/// that wants a clean point goes through reorthonormalize().
template <ScalarType T>
class StiefelPoint {
 public:
  static constexpr Real kDefaultTolerance = 1e-6;

  explicit StiefelPoint(Matrix<T> mat, Real ortho_tol = kDefaultTolerance);

  const Matrix<T>& mat() const { return mat_; }
  Real ortho_tol() const { return ortho_tol_; }
  std::size_t n() const { return mat_.rows(); }
  std::size_t p() const { return mat_.cols(); }

 private:
  Matrix<T> mat_;
  Real ortho_tol_;
};

/// Z in T_X St: Z^H X + X^H Z = 0.
template <ScalarType T>
class TangentVector {
 public:
  TangentVector(StiefelPoint<T> at, Matrix<T> mat);

  const StiefelPoint<T>& at() const { return at_; }
  const Matrix<T>& mat() const { return mat_; }

 private:
  StiefelPoint<T> at_;
  Matrix<T> mat_;
};

/// n x n skew-symmetric (skew-Hermitian for complex) generator of a Cayley curve.
template <ScalarType T>
class SkewOperator {
 public:
  explicit SkewOperator(Matrix<T> mat);

  static SkewOperator zero(std::size_t n) { return SkewOperator(Matrix<T>(n, n)); }

  const Matrix<T>& mat() const { return mat_; }
  std::size_t n() const { return mat_.rows(); }
  Real norm() const { return frobenius_norm(mat_); }

  /// Scalar multiple; stays skew for any real factor.
  SkewOperator scaled(Real factor) const;

 private:
  Matrix<T> mat_;
};

/// W = What - What^H with What = Z X^H - 1/2 X (X^H Z X^H).
///
/// Evaluated as What = (Z - 1/2 X (X^H Z)) X^H so that only one n x n
/// product is formed. W X is the tangent projection of Z.
template <ScalarType T>
SkewOperator<T> build_skew(const StiefelPoint<T>& x, const Matrix<T>& z);

/// W X for W = build_skew(X, Z). Equals Z - X (X^H Z + Z^H X) / 2 when X is orthonormal.
template <ScalarType T>
TangentVector<T> tangent_project(const StiefelPoint<T>& x, const Matrix<T>& z);

/// Y(alpha) = (I - alpha/2 W)^{-1} (I + alpha/2 W) X, by LU solve.
template <ScalarType T>
StiefelPoint<T> cayley_closed(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha);

/// cayley_closed without the orthonormality check on the result.
template <ScalarType T>
Matrix<T> cayley_closed_matrix(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha);

/// `iterations` steps of Y <- X + alpha/2 W (X + Y) starting from `y0`.
///
/// Contracts with factor alpha ||W|| / 2, so the caller keeps that below 1
/// (see adaptive_alpha). A negative alpha walks the curve backwards, which
/// is how the ADAM variant's minus-sign convention is expressed.
template <ScalarType T>
Matrix<T> cayley_iterative(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha,
                           std::size_t iterations, const Matrix<T>& y0);

/// min{l, 2q / (||W||_F + eps)}. Frobenius bounds the spectral norm, so
/// alpha ||W||_2 / 2 <= q < 1 holds.
template <ScalarType T>
Real adaptive_alpha(Real lr, const SkewOperator<T>& w, Real q, Real eps);

/// Random point: Q factor of a Gaussian matrix. Retries a rank-deficient
/// draw up to three times before giving up.
template <ScalarType T>
StiefelPoint<T> random_point(Rng& rng, std::size_t n, std::size_t p,
                             Real ortho_tol = StiefelPoint<T>::kDefaultTolerance);

struct RetractionCheck {
  Real c0 = 0;      ///< ||Y(0) - X||_F
  Real c1 = 0;      ///< ||(Y(h) - X)/h - W X||_F
  Real c1_half = 0; ///< same at h/2
  Real h = 0;

  /// c1 / c1_half; close to 2 for a first-order-consistent retraction.
  Real order_ratio() const {
    return c1_half > 0 ? c1 / c1_half : std::numeric_limits<Real>::quiet_NaN();
  }
};

/// Checks Y(0) = X and Y'(0) = W X for the closed-form Cayley curve.
template <ScalarType T>
RetractionCheck retraction_check(const StiefelPoint<T>& x, const SkewOperator<T>& w,
                                 Real h = 1e-5);

/// Q factor of X, i.e. the QR-based orthonormalization. Throws RankDeficient.
template <ScalarType T>
StiefelPoint<T> reorthonormalize(const Matrix<T>& x,
                                 Real ortho_tol = StiefelPoint<T>::kDefaultTolerance);

}  // namespace stiefel
