#include "stiefel/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace stiefel {

template <ScalarType T>
Real orthonormality_error(const Matrix<T>& x) {
  if (x.rows() < x.cols()) {
    throw PreconditionError("orthonormality_error: expects n >= p");
  }
  Matrix<T> gram = matmul(conj_transpose(x), x);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= T{1};
  return frobenius_norm(gram);
}

template <ScalarType T>
StiefelPoint<T>::StiefelPoint(Matrix<T> mat, Real ortho_tol) : mat_(std::move(mat)), ortho_tol_(ortho_tol) {
  if (mat_.empty() || mat_.rows() < mat_.cols()) {
    throw PreconditionError("StiefelPoint: needs an n x p matrix with n >= p");
  }
  if (!(ortho_tol >= 0)) {
    throw PreconditionError("StiefelPoint: tolerance must be nonnegative");
  }
  if (std::isinf(ortho_tol_)) {
    if (!mat_.all_finite()) throw NotOrthonormal("StiefelPoint: matrix has NaN or Inf entries");
    return;
  }
  const Real err = orthonormality_error(mat_);
  if (!(err <= ortho_tol_)) {
    throw NotOrthonormal("StiefelPoint: orthonormality error " + std::to_string(err) +
                         " exceeds tolerance " + std::to_string(ortho_tol_));
  }
}

template <ScalarType T>
TangentVector<T>::TangentVector(StiefelPoint<T> at, Matrix<T> mat) : at_(std::move(at)), mat_(std::move(mat)) {
  if (!mat_.same_shape(at_.mat())) {
    throw PreconditionError("TangentVector: shape differs from its base point");
  }
  const Matrix<T> xhz = matmul(conj_transpose(at_.mat()), mat_);
  const Real defect = frobenius_norm(xhz + conj_transpose(xhz));
  if (!(defect <= 1e-8 * std::max<Real>(1, frobenius_norm(mat_)))) {
    throw PreconditionError("TangentVector: matrix is not tangent at the base point");
  }
}

template <ScalarType T>
SkewOperator<T>::SkewOperator(Matrix<T> mat) : mat_(std::move(mat)) {
  if (mat_.empty() || mat_.rows() != mat_.cols()) {
    throw PreconditionError("SkewOperator: needs a square matrix");
  }
  // ||W + W^H||_F accumulated over the upper triangle without a copy.
  Real defect2 = 0;
  const std::size_t n = mat_.rows();
  for (std::size_t i = 0; i < n; ++i) {
    defect2 += abs2(mat_(i, i) + conj(mat_(i, i)));
    for (std::size_t j = i + 1; j < n; ++j) defect2 += 2 * abs2(mat_(i, j) + conj(mat_(j, i)));
  }
  if (!(std::sqrt(defect2) <= 1e-10 * std::max<Real>(1, frobenius_norm(mat_)))) {
    throw PreconditionError("SkewOperator: matrix is not skew");
  }
}

template <ScalarType T>
SkewOperator<T> SkewOperator<T>::scaled(Real factor) const {
  return SkewOperator(mat_ * T{factor});
}

template <ScalarType T>
SkewOperator<T> build_skew(const StiefelPoint<T>& x, const Matrix<T>& z) {
  const Matrix<T>& xm = x.mat();
  if (!z.same_shape(xm)) {
    throw PreconditionError("build_skew: Z must have the shape of X");
  }
  const Matrix<T> xh = conj_transpose(xm);
  Matrix<T> u = z;
  u.add_scaled(T{-0.5}, matmul(xm, matmul(xh, z)));
  // W = What - What^H, antisymmetrized in place; exactly skew by construction.
  Matrix<T> w = matmul(u, xh);
  const std::size_t n = w.rows();
  for (std::size_t i = 0; i < n; ++i) {
    w(i, i) -= conj(w(i, i));
    for (std::size_t j = i + 1; j < n; ++j) {
      const T upper = w(i, j) - conj(w(j, i));
      w(i, j) = upper;
      w(j, i) = -conj(upper);
    }
  }
  return SkewOperator<T>(std::move(w));
}

template <ScalarType T>
TangentVector<T> tangent_project(const StiefelPoint<T>& x, const Matrix<T>& z) {
  const SkewOperator<T> w = build_skew(x, z);
  return TangentVector<T>(x, matmul(w.mat(), x.mat()));
}

template <ScalarType T>
StiefelPoint<T> cayley_closed(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha) {
  return StiefelPoint<T>(cayley_closed_matrix(x, w, alpha), x.ortho_tol());
}

template <ScalarType T>
Matrix<T> cayley_closed_matrix(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha) {
  if (w.n() != x.n()) {
    throw PreconditionError("cayley_closed: W does not match X");
  }
  if (!std::isfinite(alpha)) {
    throw PreconditionError("cayley_closed: alpha must be finite");
  }
  if (alpha == 0) {
    return x.mat();
  }
  const T half = T{alpha / 2};
  Matrix<T> lhs = Matrix<T>::identity(x.n());
  lhs.add_scaled(-half, w.mat());
  Matrix<T> rhs = x.mat();
  rhs.add_scaled(half, matmul(w.mat(), x.mat()));
  return solve_linear(lhs, rhs);
}

template <ScalarType T>
Matrix<T> cayley_iterative(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real alpha,
                           std::size_t iterations, const Matrix<T>& y0) {
  if (w.n() != x.n() || !y0.same_shape(x.mat())) {
    throw PreconditionError("cayley_iterative: W or Y0 does not match X");
  }
  const T half = T{alpha / 2};
  Matrix<T> y = y0;
  for (std::size_t i = 0; i < iterations; ++i) {
    y += x.mat();
    Matrix<T> next = x.mat();
    next.add_scaled(half, matmul(w.mat(), y));
    y = std::move(next);
  }
  return y;
}

template <ScalarType T>
Real adaptive_alpha(Real lr, const SkewOperator<T>& w, Real q, Real eps) {
  if (!(lr > 0) || !(q > 0 && q < 1) || !(eps > 0)) {
    throw PreconditionError("adaptive_alpha: needs lr > 0, 0 < q < 1, eps > 0");
  }
  return std::min(lr, 2 * q / (w.norm() + eps));
}

template <ScalarType T>
StiefelPoint<T> random_point(Rng& rng, std::size_t n, std::size_t p, Real ortho_tol) {
  if (n < p || p == 0) {
    throw PreconditionError("random_point: needs n >= p >= 1");
  }
  constexpr int kAttempts = 3;
  for (int attempt = 1;; ++attempt) {
    try {
      return StiefelPoint<T>(qr_decompose(gaussian_matrix<T>(rng, n, p)).q, ortho_tol);
    } catch (const RankDeficient&) {
      if (attempt == kAttempts) throw;
    }
  }
}

template <ScalarType T>
RetractionCheck retraction_check(const StiefelPoint<T>& x, const SkewOperator<T>& w, Real h) {
  const Matrix<T> velocity = matmul(w.mat(), x.mat());
  auto fd_defect = [&](Real step) {
    Matrix<T> diff = cayley_closed(x, w, step).mat() - x.mat();
    diff *= T{1 / step};
    return frobenius_norm(diff - velocity);
  };
  RetractionCheck out;
  out.h = h;
  out.c0 = frobenius_norm(cayley_closed(x, w, 0.0).mat() - x.mat());
  out.c1 = fd_defect(h);
  out.c1_half = fd_defect(h / 2);
  return out;
}

template <ScalarType T>
StiefelPoint<T> reorthonormalize(const Matrix<T>& x, Real ortho_tol) {
  return StiefelPoint<T>(qr_decompose(x).q, ortho_tol);
}

#define STIEFEL_INSTANTIATE_MANIFOLD(T)                                                              \
  template Real orthonormality_error(const Matrix<T>&);                                              \
  template class StiefelPoint<T>;                                                                    \
  template class TangentVector<T>;                                                                   \
  template class SkewOperator<T>;                                                                    \
  template SkewOperator<T> build_skew(const StiefelPoint<T>&, const Matrix<T>&);                     \
  template TangentVector<T> tangent_project(const StiefelPoint<T>&, const Matrix<T>&);               \
  template StiefelPoint<T> cayley_closed(const StiefelPoint<T>&, const SkewOperator<T>&, Real);      \
  template Matrix<T> cayley_closed_matrix(const StiefelPoint<T>&, const SkewOperator<T>&, Real);    \
  template Matrix<T> cayley_iterative(const StiefelPoint<T>&, const SkewOperator<T>&, Real,          \
                                      std::size_t, const Matrix<T>&);                                \
  template Real adaptive_alpha(Real, const SkewOperator<T>&, Real, Real);                            \
  template StiefelPoint<T> random_point(Rng&, std::size_t, std::size_t, Real);                       \
  template RetractionCheck retraction_check(const StiefelPoint<T>&, const SkewOperator<T>&, Real);   \
  template StiefelPoint<T> reorthonormalize(const Matrix<T>&, Real);

STIEFEL_INSTANTIATE_MANIFOLD(Real)
STIEFEL_INSTANTIATE_MANIFOLD(Complex)

#undef STIEFEL_INSTANTIATE_MANIFOLD

}  // namespace stiefel
