#pragma once

#include <complex>
#include <cstddef>

#include "stiefel/linalg.hpp"
#include "stiefel/matrix.hpp"

namespace stiefel::testing {

/// Textbook triple loop, the reference for every product in the tests.
template <ScalarType T>
Matrix<T> naive_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T sum{};
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      c(i, j) = sum;
    }
  }
  return c;
}

template <ScalarType T>
Matrix<T> naive_adjoint(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if constexpr (is_complex<T>::value) {
        out(j, i) = std::conj(a(i, j));
      } else {
        out(j, i) = a(i, j);
      }
    }
  }
  return out;
}

template <ScalarType T>
Real max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  Real worst = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  }
  return worst;
}

template <ScalarType T>
Real distance(const Matrix<T>& a, const Matrix<T>& b) {
  return frobenius_norm(a - b);
}

}  // namespace stiefel::testing
