#include "stiefel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace stiefel {
namespace {

// y[0..n) += s * x[0..n). The complex overload spells the product out so
// the loop vectorizes instead of going through the NaN-recovery path of
// std::complex multiplication.
inline void axpy(Real s, const Real* __restrict x, Real* __restrict y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += s * x[j];
}

inline void axpy(const Complex& s, const Complex* x, Complex* y, std::size_t n) {
  const Real sr = s.real();
  const Real si = s.imag();
  const Real* __restrict xr = reinterpret_cast<const Real*>(x);
  Real* __restrict yr = reinterpret_cast<Real*>(y);
  for (std::size_t j = 0; j < n; ++j) {
    const Real a = xr[2 * j];
    const Real b = xr[2 * j + 1];
    yr[2 * j] += sr * a - si * b;
    yr[2 * j + 1] += sr * b + si * a;
  }
}

inline Complex mul(const Complex& a, const Complex& b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}
inline Real mul(Real a, Real b) { return a * b; }

constexpr std::size_t kRowBlock = 64;
constexpr std::size_t kInnerBlock = 128;
constexpr std::size_t kColBlock = 256;

std::string shape(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// C -= A B for an m x kk block A and kk x nn block B, all row-major with the
// given row strides. Same loop blocking as matmul.
template <ScalarType T>
void subtract_product(T* c, std::size_t ldc, const T* a, std::size_t lda, const T* b, std::size_t ldb,
                      std::size_t m, std::size_t kk, std::size_t nn) {
  for (std::size_t i0 = 0; i0 < m; i0 += kRowBlock) {
    const std::size_t i1 = std::min(m, i0 + kRowBlock);
    for (std::size_t k0 = 0; k0 < kk; k0 += kInnerBlock) {
      const std::size_t k1 = std::min(kk, k0 + kInnerBlock);
      for (std::size_t j0 = 0; j0 < nn; j0 += kColBlock) {
        const std::size_t width = std::min(nn, j0 + kColBlock) - j0;
        for (std::size_t i = i0; i < i1; ++i) {
          T* crow = c + i * ldc + j0;
          const T* arow = a + i * lda;
          for (std::size_t k = k0; k < k1; ++k) axpy(-arow[k], b + k * ldb + j0, crow, width);
        }
      }
    }
  }
}

constexpr std::size_t kPanel = 64;

}  // namespace

template <ScalarType T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw PreconditionError("matmul: inner dimensions differ (" + shape(a.rows(), a.cols()) +
                            " * " + shape(b.rows(), b.cols()) + ")");
  }
  const std::size_t m = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  Matrix<T> c(m, n);
  // Each C(i, j) accumulates k in increasing order regardless of blocking.
  for (std::size_t i0 = 0; i0 < m; i0 += kRowBlock) {
    const std::size_t i1 = std::min(m, i0 + kRowBlock);
    for (std::size_t k0 = 0; k0 < inner; k0 += kInnerBlock) {
      const std::size_t k1 = std::min(inner, k0 + kInnerBlock);
      for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
        const std::size_t width = std::min(n, j0 + kColBlock) - j0;
        for (std::size_t i = i0; i < i1; ++i) {
          T* crow = c.row(i).data() + j0;
          const T* arow = a.row(i).data();
          for (std::size_t k = k0; k < k1; ++k) {
            axpy(arow[k], b.row(k).data() + j0, crow, width);
          }
        }
      }
    }
  }
  return c;
}

template <ScalarType T>
Matrix<T> conj_transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      t(j, i) = conj(a(i, j));
    }
  }
  return t;
}

template <ScalarType T>
Real frobenius_norm(const Matrix<T>& a) {
  Real sum = 0;
  for (const T& x : a.data()) sum += abs2(x);
  if (std::isfinite(sum)) return std::sqrt(sum);
  // Squares overflowed; rescale by the largest magnitude.
  Real scale = 0;
  for (const T& x : a.data()) scale = std::max(scale, std::abs(x));
  if (!std::isfinite(scale)) return scale;
  Real scaled = 0;
  for (const T& x : a.data()) scaled += abs2(x / scale);
  return scale * std::sqrt(scaled);
}

template <ScalarType T>
Real inner_product(const Matrix<T>& a, const Matrix<T>& b) {
  if (!a.same_shape(b)) {
    throw PreconditionError("inner_product: shape mismatch");
  }
  Real sum = 0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) sum += real_part(mul(conj(x[k]), y[k]));
  return sum;
}

template <ScalarType T>
LuFactors<T> lu_factor(const Matrix<T>& a) {
  if (a.rows() != a.cols()) {
    throw PreconditionError("lu_factor: matrix is " + shape(a.rows(), a.cols()) + ", not square");
  }
  const std::size_t n = a.rows();
  LuFactors<T> f{a, std::vector<std::size_t>(n), 1};
  Matrix<T>& lu = f.packed;
  for (std::size_t i = 0; i < n; ++i) f.pivot[i] = i;

  Real max_abs = 0;
  for (const T& x : a.data()) max_abs = std::max(max_abs, std::sqrt(abs2(x)));
  const Real tiny = static_cast<Real>(n) * machine_epsilon * max_abs;

  // Right-looking blocked elimination: factor a panel of columns, form the
  // matching block row of U, then update the trailing matrix in one product.
  for (std::size_t k0 = 0; k0 < n; k0 += kPanel) {
    const std::size_t k1 = std::min(n, k0 + kPanel);
    for (std::size_t k = k0; k < k1; ++k) {
      std::size_t p = k;
      Real best = abs2(lu(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        const Real v = abs2(lu(i, k));
        if (v > best) {
          best = v;
          p = i;
        }
      }
      if (!(std::sqrt(best) > tiny)) {
        throw SingularMatrix("lu_factor: pivot " + std::to_string(k) + " vanishes to working precision");
      }
      if (p != k) {
        std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(p).begin());
        std::swap(f.pivot[k], f.pivot[p]);
        f.permutation_sign = -f.permutation_sign;
      }
      const T inv_pivot = T{1} / lu(k, k);
      const T* urow = lu.row(k).data() + k + 1;
      for (std::size_t i = k + 1; i < n; ++i) {
        const T l = mul(lu(i, k), inv_pivot);
        lu(i, k) = l;
        axpy(-l, urow, lu.row(i).data() + k + 1, k1 - k - 1);
      }
    }
    if (k1 == n) break;
    for (std::size_t r = k0 + 1; r < k1; ++r) {
      for (std::size_t k = k0; k < r; ++k) axpy(-lu(r, k), lu.row(k).data() + k1, lu.row(r).data() + k1, n - k1);
    }
    subtract_product(lu.row(k1).data() + k1, n, lu.row(k1).data() + k0, n, lu.row(k0).data() + k1, n, n - k1,
                     k1 - k0, n - k1);
  }
  return f;
}

template <ScalarType T>
Matrix<T> lu_solve(const LuFactors<T>& f, const Matrix<T>& b) {
  const Matrix<T>& lu = f.packed;
  const std::size_t n = lu.rows();
  if (b.rows() != n) {
    throw PreconditionError("lu_solve: right-hand side has " + std::to_string(b.rows()) +
                            " rows, expected " + std::to_string(n));
  }
  const std::size_t m = b.cols();
  Matrix<T> x(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(b.row(f.pivot[i]).begin(), b.row(f.pivot[i]).end(), x.row(i).begin());
  }
  // Forward then back substitution, a block of rows at a time: the finished
  // rows enter through one product, the diagonal block is solved directly.
  for (std::size_t i0 = 0; i0 < n; i0 += kPanel) {
    const std::size_t i1 = std::min(n, i0 + kPanel);
    if (i0 > 0) subtract_product(x.row(i0).data(), m, lu.row(i0).data(), n, x.row(0).data(), m, i1 - i0, i0, m);
    for (std::size_t i = i0 + 1; i < i1; ++i) {
      T* xi = x.row(i).data();
      for (std::size_t k = i0; k < i; ++k) axpy(-lu(i, k), x.row(k).data(), xi, m);
    }
  }
  for (std::size_t i1 = n; i1 > 0;) {
    const std::size_t i0 = i1 > kPanel ? i1 - kPanel : 0;
    if (i1 < n) {
      subtract_product(x.row(i0).data(), m, lu.row(i0).data() + i1, n, x.row(i1).data(), m, i1 - i0, n - i1, m);
    }
    for (std::size_t ii = i1; ii-- > i0;) {
      T* xi = x.row(ii).data();
      for (std::size_t k = ii + 1; k < i1; ++k) axpy(-lu(ii, k), x.row(k).data(), xi, m);
      const T inv = T{1} / lu(ii, ii);
      for (std::size_t j = 0; j < m; ++j) xi[j] = mul(xi[j], inv);
    }
    i1 = i0;
  }
  return x;
}

template <ScalarType T>
Matrix<T> solve_linear(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != a.cols()) {
    throw PreconditionError("solve_linear: coefficient matrix is not square");
  }
  if (b.rows() != a.rows()) {
    throw PreconditionError("solve_linear: right-hand side row count differs");
  }
  return lu_solve(lu_factor(a), b);
}

template <ScalarType T>
T determinant(const Matrix<T>& a) {
  const auto f = lu_factor(a);
  T det = static_cast<Real>(f.permutation_sign);
  for (std::size_t i = 0; i < a.rows(); ++i) det *= f.packed(i, i);
  return det;
}

template <ScalarType T>
QrFactors<T> qr_decompose(const Matrix<T>& a) {
  const std::size_t n = a.rows();
  const std::size_t p = a.cols();
  if (n < p) {
    throw PreconditionError("qr_decompose: needs rows >= cols, got " + shape(n, p));
  }
  const Real tol = 10.0 * static_cast<Real>(n) * machine_epsilon * frobenius_norm(a);

  Matrix<T> work = a;
  std::vector<std::vector<T>> reflectors(p);
  std::vector<Real> reflector_norm2(p);
  std::vector<T> s(p);

  for (std::size_t k = 0; k < p; ++k) {
    Real norm2 = 0;
    for (std::size_t i = k; i < n; ++i) norm2 += abs2(work(i, k));
    const Real norm = std::sqrt(norm2);
    if (!(norm > tol)) {
      throw RankDeficient("qr_decompose: column " + std::to_string(k) + " is linearly dependent");
    }
    const T x0 = work(k, k);
    const Real ax0 = std::sqrt(abs2(x0));
    const T phase = ax0 > 0 ? x0 / ax0 : T{1};

    // v = x + phase * |x| e1, so H x = -phase * |x| e1 without cancellation.
    std::vector<T>& v = reflectors[k];
    v.resize(n - k);
    for (std::size_t i = k; i < n; ++i) v[i - k] = work(i, k);
    v[0] += phase * norm;
    Real vnorm2 = 0;
    for (const T& vi : v) vnorm2 += abs2(vi);
    reflector_norm2[k] = vnorm2;

    // work[k:, k:] -= v * (2 / vnorm2) * (v^H work[k:, k:])
    std::fill(s.begin(), s.end(), T{});
    for (std::size_t i = k; i < n; ++i) axpy(conj(v[i - k]), work.row(i).data() + k, s.data(), p - k);
    for (std::size_t j = 0; j < p - k; ++j) s[j] *= 2.0 / vnorm2;
    for (std::size_t i = k; i < n; ++i) axpy(-v[i - k], s.data(), work.row(i).data() + k, p - k);
  }

  QrFactors<T> out{Matrix<T>::identity(n, p), Matrix<T>(p, p)};
  Matrix<T>& q = out.q;
  for (std::size_t kk = p; kk-- > 0;) {
    const std::vector<T>& v = reflectors[kk];
    std::fill(s.begin(), s.end(), T{});
    for (std::size_t i = kk; i < n; ++i) axpy(conj(v[i - kk]), q.row(i).data() + kk, s.data(), p - kk);
    for (std::size_t j = 0; j < p - kk; ++j) s[j] *= 2.0 / reflector_norm2[kk];
    for (std::size_t i = kk; i < n; ++i) axpy(-v[i - kk], s.data(), q.row(i).data() + kk, p - kk);
  }

  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) out.r(i, j) = work(i, j);
  }
  // Rotate each diagonal entry of R onto the positive real axis.
  for (std::size_t k = 0; k < p; ++k) {
    const T d = out.r(k, k);
    const Real ad = std::sqrt(abs2(d));
    const T phase = d / ad;
    const T phase_conj = conj(phase);
    for (std::size_t j = k; j < p; ++j) out.r(k, j) *= phase_conj;
    out.r(k, k) = ad;
    for (std::size_t i = 0; i < n; ++i) q(i, k) *= phase;
  }
  return out;
}

#define STIEFEL_INSTANTIATE_LINALG(T)                                  \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);       \
  template Matrix<T> conj_transpose(const Matrix<T>&);                 \
  template Real frobenius_norm(const Matrix<T>&);                      \
  template Real inner_product(const Matrix<T>&, const Matrix<T>&);     \
  template LuFactors<T> lu_factor(const Matrix<T>&);                   \
  template Matrix<T> lu_solve(const LuFactors<T>&, const Matrix<T>&);  \
  template Matrix<T> solve_linear(const Matrix<T>&, const Matrix<T>&); \
  template T determinant(const Matrix<T>&);                            \
  template QrFactors<T> qr_decompose(const Matrix<T>&);

STIEFEL_INSTANTIATE_LINALG(Real)
STIEFEL_INSTANTIATE_LINALG(Complex)

#undef STIEFEL_INSTANTIATE_LINALG

}  // namespace stiefel
