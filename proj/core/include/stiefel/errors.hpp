#pragma once

#include <stdexcept>
#include <string>

namespace stiefel {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (shapes, ranges, layout).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// LU hit a pivot that is zero to working precision.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// Householder QR met a column with no component outside the span of the previous ones.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// A supplied gradient contained NaN or Inf. The optimizer state is left untouched.
class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

/// Cayley ADAM was asked to step with a counter below 1.
class InvalidStep : public Error {
 public:
  using Error::Error;
};

/// A matrix handed to StiefelPoint is further from orthonormal than its tolerance allows.
class NotOrthonormal : public Error {
 public:
  using Error::Error;
};

}  // namespace stiefel
