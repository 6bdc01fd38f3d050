#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stiefel/manifold.hpp"
#include "stiefel/optimizers.hpp"
#include "stiefel/rng.hpp"

namespace stiefel {

/// Objective on St(n, p) with an analytic Euclidean gradient.
///
/// Gradients follow df = Re tr(G^H dX), which for real matrices is the
/// ordinary gradient and for complex ones is twice the Wirtinger derivative
/// with respect to conj(X).
template <ScalarType T>
struct Problem {
  std::string name;
  std::size_t n = 0;
  std::size_t p = 0;
  std::function<Real(const Matrix<T>&)> eval;
  std::function<Matrix<T>(const Matrix<T>&)> grad;
  std::optional<Real> optimum;          ///< known minimum value
  std::optional<Matrix<T>> planted;     ///< known minimizer
  std::function<StiefelPoint<T>(Rng&)> sample_start;  ///< starting point in the minimizer's component
};

/// f(X) = ||A X - B||_F^2 with A Gaussian n x n and B = A Q for a planted
/// orthogonal/unitary Q, so f(Q) = 0.
///
/// For real matrices Q is drawn from SO(n) and sample_start also returns
/// points of SO(n): the Cayley curve never leaves the component it starts in.
template <ScalarType T>
Problem<T> make_procrustes(Rng& rng, std::size_t n);

/// f(X) = -tr(X^H A X) with A = Q diag(spectrum) Q^H for a random unitary Q.
/// The minimum is minus the sum of the p largest spectrum values, attained
/// at the first p columns of Q.
template <ScalarType T>
Problem<T> make_subspace(Rng& rng, std::size_t n, std::size_t p, const std::vector<Real>& spectrum);

/// Descending spectrum of length n whose top p values lie in [1.5, 2.5] and
/// the rest in [0.1, 1.0], giving the dominant subspace a planted gap.
std::vector<Real> gapped_spectrum(Rng& rng, std::size_t n, std::size_t p);

// ---------------------------------------------------------------------------
// Row-orthonormal adapter
// ---------------------------------------------------------------------------

/// A p x n matrix K with orthonormal rows (p <= n) is stored as the n x p
/// point K^H. Throws PreconditionError for p > n and NotOrthonormal when
/// ||K K^H - I||_F exceeds the tolerance.
template <ScalarType T>
StiefelPoint<T> stiefel_adapter_to_internal(const Matrix<T>& k,
                                            Real ortho_tol = StiefelPoint<T>::kDefaultTolerance);

/// Inverse of stiefel_adapter_to_internal; the round trip is exact.
template <ScalarType T>
Matrix<T> stiefel_adapter_from_internal(const StiefelPoint<T>& x);

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct FdReport {
  Real max_rel_error = 0;
  Real max_abs_fd = 0;        ///< largest |finite-difference directional derivative|
  Real max_abs_analytic = 0;  ///< largest |Re tr(V^H grad_M f)|
};

/// Compares, along `trials` random unit tangent directions V, the central
/// difference (f(R(eps V)) - f(R(-eps V))) / (2 eps) on the closed-form
/// Cayley curve with Re tr(V^H pi_X(grad f)). The relative error uses
/// max(|fd|, 1e-6 max(1, |f(X)|)) as denominator.
template <ScalarType T>
FdReport fd_check(const Problem<T>& problem, const StiefelPoint<T>& x, Rng& rng, std::size_t trials,
                  Real eps = 1e-6);

// ---------------------------------------------------------------------------
// Toy network with one constrained layer
// ---------------------------------------------------------------------------

struct ToyNetConfig {
  std::size_t input = 2;
  std::size_t hidden = 16;      ///< n of the constrained layer
  std::size_t constrained = 8;  ///< p of the constrained layer (p <= n)
  std::size_t output = 2;
  std::size_t samples = 512;
  Real separation = 4.0;        ///< distance between the two blob means
  Method method = Method::Sgd;
  bool constrain = true;        ///< false puts K in the Euclidean group (baseline)
  Real lr_euclidean = kCayleySgdRates.euclidean;
  Real lr_stiefel = kCayleySgdRates.stiefel;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t s = 2;
  Real weight_decay = 0;
  Real ortho_tol = 1e-5;
};

/// 2 -> 16 -> 8 -> 2 tanh network trained full batch on two Gaussian blobs.
///
///   h1 = tanh(W1 x + b1),  h2 = tanh(K h1 + b2),  z = W3 h2 + b3
///
/// K (8 x 16) has orthonormal rows and lives in the Stiefel group through the
/// transpose adapter; W1, b1, b2, W3, b3 form the Euclidean group.
class ToyNet {
 public:
  ToyNet(RealMatrix inputs, std::vector<int> labels, std::vector<ParamGroup<Real>> groups, ToyNetConfig config);

  Real loss() const;
  Real accuracy() const;

  /// Gradients aligned with groups(); K's entry is in internal (n x p) layout.
  std::vector<std::vector<RealMatrix>> gradients() const;

  void step(Real lr_scale = 1.0);

  /// K as a p x n row-orthonormal matrix.
  RealMatrix constrained_weight() const;
  /// ||K K^T - I||_F.
  Real constrained_error() const;
  /// Step length used for K by the last step.
  Real constrained_alpha() const;

  std::vector<ParamGroup<Real>>& groups() { return groups_; }
  const std::vector<ParamGroup<Real>>& groups() const { return groups_; }
  const ToyNetConfig& config() const { return config_; }

  /// Loss as a function of K's internal point, other weights frozen.
  Problem<Real> constrained_problem() const;

  /// Max relative error of central differences against the backprop
  /// gradient for every Euclidean parameter, along random directions.
  /// `gradient_scale` multiplies the backprop side (1 for a real check).
  Real euclidean_fd_check(Rng& rng, std::size_t trials, Real eps = 1e-6, Real gradient_scale = 1) const;

 private:
  struct Grads;
  Real loss_with(const RealMatrix& k_rows) const;
  Grads backprop() const;
  const RealMatrix& param(const char* name) const;
  RealMatrix& param_mut(const char* name);

  RealMatrix inputs_;
  std::vector<int> labels_;
  std::vector<ParamGroup<Real>> groups_;
  ToyNetConfig config_;
};

ToyNet make_toynet(Rng& rng, const ToyNetConfig& config = {});

}  // namespace stiefel
