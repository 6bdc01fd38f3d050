#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stiefel/manifold.hpp"
#include "stiefel/matrix.hpp"

namespace stiefel {

/// How a Cayley optimizer moves along the curve once W and alpha are known.
/// ClosedForm swaps the fixed-point iteration for the LU-based transform;
/// it exists for comparison runs.
enum class Retraction { Iterative, ClosedForm };

// ---------------------------------------------------------------------------
// Cayley SGD with momentum
// ---------------------------------------------------------------------------

struct SgdHyper {
  Real lr = 0.2;
  Real beta = 0.9;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t s = 2;  ///< fixed-point iterations per step
  Retraction retraction = Retraction::Iterative;
};

template <ScalarType T>
struct SgdState {
  Matrix<T> momentum;  ///< n x p; starts at zero
  std::int64_t step = 1;
  SgdHyper hyper;
  Real last_alpha = 0;  ///< step length picked by the most recent update
};

template <ScalarType T>
SgdState<T> make_sgd_state(std::size_t n, std::size_t p, const SgdHyper& hyper = {});

template <ScalarType T>
struct SgdStepResult {
  StiefelPoint<T> point;
  SgdState<T> state;
};

/// One Cayley SGD step from X given the Euclidean gradient G:
///
///   M <- beta M - G
///   What <- M X^H - 1/2 X (X^H M X^H),  W <- What - What^H
///   M <- W X                                   (momentum back in T_X)
///   alpha <- min{l, 2q / (||W||_F + eps)}
///   Y^0 <- X + alpha M,  Y^i <- X + alpha/2 W (X + Y^{i-1}),  i = 1..s
///
/// Returns Y^s with the input point's tolerance, which throws NotOrthonormal
/// if the new point drifted past it. NonFiniteGradient leaves nothing changed.
template <ScalarType T>
SgdStepResult<T> cayley_sgd_step(const SgdState<T>& state, const StiefelPoint<T>& x, const Matrix<T>& grad);

// ---------------------------------------------------------------------------
// Cayley ADAM
// ---------------------------------------------------------------------------

struct AdamHyper {
  Real lr = 0.4;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t s = 2;
  Retraction retraction = Retraction::Iterative;
};

/// One second-moment scalar per constrained matrix.
template <ScalarType T>
struct AdamState {
  Matrix<T> momentum;
  Real second_moment = 1;  ///< v, initialised to 1
  std::int64_t step = 1;   ///< k, first step uses k = 1
  AdamHyper hyper;
  Real last_alpha = 0;
};

template <ScalarType T>
AdamState<T> make_adam_state(std::size_t n, std::size_t p, const AdamHyper& hyper = {});

template <ScalarType T>
struct AdamStepResult {
  StiefelPoint<T> point;
  AdamState<T> state;
};

/// One Cayley ADAM step:
///
///   M <- beta1 M + (1 - beta1) G
///   v <- beta2 v + (1 - beta2) ||G||_F^2,   vhat <- v / (1 - beta2^k)
///   r <- (1 - beta1^k) sqrt(vhat + eps)
///   W <- (What - What^H) / r,  M <- r W X
///   alpha <- min{l, 2q / (||W||_F + eps)}
///   Y^0 <- X - alpha M,  Y^i <- X - alpha/2 W (X + Y^{i-1})
///
/// Throws InvalidStep when k < 1 (r would vanish).
template <ScalarType T>
AdamStepResult<T> cayley_adam_step(const AdamState<T>& state, const StiefelPoint<T>& x, const Matrix<T>& grad);

// ---------------------------------------------------------------------------
// Euclidean baselines
// ---------------------------------------------------------------------------

template <ScalarType T>
struct EuclidSgdResult {
  Matrix<T> x;
  Matrix<T> momentum;
};

/// Heavy ball: M' = beta M - G, X' = X + l M'. An empty M counts as zero.
template <ScalarType T>
EuclidSgdResult<T> euclid_sgd_step(const Matrix<T>& momentum, const Matrix<T>& x, const Matrix<T>& grad,
                                   Real lr, Real beta);

struct EuclidAdamHyper {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

template <ScalarType T>
struct EuclidAdamState {
  Matrix<T> m;     ///< first moment
  Matrix<Real> v;  ///< elementwise |g|^2 moment
  std::int64_t step = 1;
  EuclidAdamHyper hyper;
};

template <ScalarType T>
EuclidAdamState<T> make_euclid_adam_state(std::size_t rows, std::size_t cols, const EuclidAdamHyper& hyper = {});

template <ScalarType T>
struct EuclidAdamResult {
  Matrix<T> x;
  EuclidAdamState<T> state;
};

/// Elementwise ADAM with bias correction: x -= l mhat / (sqrt(vhat) + eps).
template <ScalarType T>
EuclidAdamResult<T> euclid_adam_step(const EuclidAdamState<T>& state, const Matrix<T>& x, const Matrix<T>& grad);

// ---------------------------------------------------------------------------
// Parameter groups
// ---------------------------------------------------------------------------

enum class GroupKind { Euclidean, Stiefel };
enum class Method { Sgd, Adam };

template <ScalarType T>
struct EuclidSgdState {
  Matrix<T> momentum;
};

template <ScalarType T>
using OptimizerSlot =
    std::variant<std::monostate, SgdState<T>, AdamState<T>, EuclidSgdState<T>, EuclidAdamState<T>>;

/// A trainable matrix. Stiefel parameters are stored column-orthonormal
/// (n x p); row-orthonormal layers transpose through the problems-layer adapter.
template <ScalarType T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  OptimizerSlot<T> state;  ///< created on the first step
  Real last_alpha = 0;
};

/// Parameters sharing one optimizer family and one learning rate.
///
/// Stiefel groups step with Cayley SGD / Cayley ADAM, Euclidean groups with
/// heavy-ball SGD / ADAM. `beta1` is the SGD momentum coefficient.
template <ScalarType T>
struct ParamGroup {
  GroupKind kind = GroupKind::Euclidean;
  Method method = Method::Sgd;
  Real lr = 0.01;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t s = 2;
  Real weight_decay = 0;  ///< Euclidean groups only
  Real ortho_tol = 1e-5;  ///< Stiefel groups: tolerance the stepped points must meet
  std::vector<Parameter<T>> params;
};

/// Steps every parameter with its group's optimizer at lr * lr_scale.
///
/// grads[g][i] is the Euclidean gradient of groups[g].params[i]. All shapes,
/// finiteness and group settings are validated before anything is modified.
template <ScalarType T>
void group_step(std::vector<ParamGroup<T>>& groups, const std::vector<std::vector<Matrix<T>>>& grads,
                Real lr_scale = 1.0);

/// base_lr * factor^(number of milestones <= step).
Real lr_schedule(std::int64_t step, Real base_lr, std::span<const std::int64_t> milestones, Real factor);

/// Default learning rates for mixed training.
struct MixedRates {
  Real euclidean;
  Real stiefel;
};
inline constexpr MixedRates kCayleySgdRates{0.01, 0.2};
inline constexpr MixedRates kCayleyAdamRates{0.01, 0.4};

}  // namespace stiefel
