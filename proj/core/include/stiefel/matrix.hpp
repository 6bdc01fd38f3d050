#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "stiefel/errors.hpp"

namespace stiefel {

using Real = double;
using Complex = std::complex<double>;

enum class Field { Real, Complex };

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Scalar types the kernels are instantiated for.
template <class T>
concept ScalarType = std::is_same_v<T, Real> || std::is_same_v<T, Complex>;

template <ScalarType T>
constexpr Field field_of() {
  return is_complex<T>::value ? Field::Complex : Field::Real;
}

inline Real conj(Real x) { return x; }
inline Complex conj(const Complex& z) { return std::conj(z); }

/// |z|^2 without the square root.
inline Real abs2(Real x) { return x * x; }
inline Real abs2(const Complex& z) { return z.real() * z.real() + z.imag() * z.imag(); }

inline Real real_part(Real x) { return x; }
inline Real real_part(const Complex& z) { return z.real(); }

inline bool is_finite(Real x) { return std::isfinite(x); }
inline bool is_finite(const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

/// Dense row-major matrix over Real or Complex.
///
/// A default-constructed matrix is the empty 0x0 placeholder; every other
/// matrix has positive dimensions. Kernels never mutate their inputs.
template <ScalarType T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, T{}) {
    if (rows == 0 || cols == 0) {
      throw PreconditionError("Matrix dimensions must be positive");
    }
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) {
      throw PreconditionError("Matrix dimensions must be positive");
    }
    if (data_.size() != rows * cols) {
      throw PreconditionError("Matrix data length does not match rows*cols");
    }
  }

  /// Row-list literal, e.g. Matrix<Real>{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<T>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    if (rows_ == 0 || cols_ == 0) {
      throw PreconditionError("Matrix dimensions must be positive");
    }
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) {
        throw PreconditionError("ragged matrix literal");
      }
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) { return identity(n, n); }

  /// Leading n x p block of the identity.
  static Matrix identity(std::size_t n, std::size_t p) {
    Matrix m(n, p);
    for (std::size_t i = 0; i < std::min(n, p); ++i) {
      m(i, i) = T{1};
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](const T& x) { return is_finite(x); });
  }

  Matrix& operator+=(const Matrix& other) {
    require_same_shape(other, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }

  Matrix& operator-=(const Matrix& other) {
    require_same_shape(other, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
  }

  Matrix& operator*=(T s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  /// this += s * other
  Matrix& add_scaled(T s, const Matrix& other) {
    require_same_shape(other, "add_scaled");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * other.data_[k];
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(T s, Matrix a) { return a *= s; }
  friend Matrix operator*(Matrix a, T s) { return a *= s; }
  friend Matrix operator-(Matrix a) { return a *= T{-1}; }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  void require_same_shape(const Matrix& other, const char* op) const {
    if (!same_shape(other)) {
      throw PreconditionError(std::string("shape mismatch in ") + op);
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<Real>;
using ComplexMatrix = Matrix<Complex>;

}  // namespace stiefel
