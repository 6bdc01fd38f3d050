#pragma once

#include <cstddef>
#include <cstdint>

#include "stiefel/matrix.hpp"

namespace stiefel {

/// Counter-based SplitMix64 generator.
///
/// Output k of stream (seed, stream) is mix64(key + k * 0x9E3779B97F4A7C15)
/// with key = mix64(seed ^ mix64(stream + 0xD1B54A32D192ED03)). Only integer
/// arithmetic is involved, so the raw stream is identical on every platform.
/// Normal variates use Box-Muller on top of it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent generator for sub-experiment `stream`, derived from this seed.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x100000001B3ull + stream + 1); }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// One standard normal variate.
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// n x p matrix of i.i.d. N(0, 1) entries. Complex entries get independent
/// N(0, 1) real and imaginary parts.
template <ScalarType T>
Matrix<T> gaussian_matrix(Rng& rng, std::size_t n, std::size_t p);

}  // namespace stiefel
