#include "stiefel/rng.hpp"

#include <cmath>
#include <numbers>

namespace stiefel {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03ull))) {}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <ScalarType T>
Matrix<T> gaussian_matrix(Rng& rng, std::size_t n, std::size_t p) {
  Matrix<T> m(n, p);
  for (auto& x : m.data()) {
    if constexpr (is_complex<T>::value) {
      const double re = rng.normal();
      const double im = rng.normal();
      x = {re, im};
    } else {
      x = rng.normal();
    }
  }
  return m;
}

template Matrix<Real> gaussian_matrix(Rng&, std::size_t, std::size_t);
template Matrix<Complex> gaussian_matrix(Rng&, std::size_t, std::size_t);

}  // namespace stiefel
