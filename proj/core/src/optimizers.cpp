#include "stiefel/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stiefel/linalg.hpp"

namespace stiefel {
namespace {

template <ScalarType T>
void require_gradient(const Matrix<T>& x, const Matrix<T>& grad, const char* who) {
  if (!grad.same_shape(x)) {
    throw PreconditionError(std::string(who) + ": gradient shape differs from the parameter");
  }
  if (!grad.all_finite()) {
    throw NonFiniteGradient(std::string(who) + ": gradient has NaN or Inf entries");
  }
}

template <ScalarType T>
Matrix<T> momentum_or_zero(const Matrix<T>& m, const Matrix<T>& x) {
  if (m.empty()) return Matrix<T>(x.rows(), x.cols());
  if (!m.same_shape(x)) {
    throw PreconditionError("optimizer momentum shape differs from the parameter");
  }
  return m;
}

}  // namespace

template <ScalarType T>
SgdState<T> make_sgd_state(std::size_t n, std::size_t p, const SgdHyper& hyper) {
  return SgdState<T>{Matrix<T>(n, p), 1, hyper, 0};
}

template <ScalarType T>
SgdStepResult<T> cayley_sgd_step(const SgdState<T>& state, const StiefelPoint<T>& x, const Matrix<T>& grad) {
  require_gradient(x.mat(), grad, "cayley_sgd_step");
  const SgdHyper& h = state.hyper;

  Matrix<T> m = momentum_or_zero(state.momentum, x.mat());
  m *= T{h.beta};
  m -= grad;

  const SkewOperator<T> w = build_skew(x, m);
  m = matmul(w.mat(), x.mat());

  const Real alpha = adaptive_alpha(h.lr, w, h.q, h.eps);
  Matrix<T> y;
  if (h.retraction == Retraction::ClosedForm) {
    y = cayley_closed(x, w, alpha).mat();
  } else {
    Matrix<T> y0 = x.mat();
    y0.add_scaled(T{alpha}, m);
    y = cayley_iterative(x, w, alpha, h.s, y0);
  }

  SgdState<T> next{std::move(m), state.step + 1, h, alpha};
  return {StiefelPoint<T>(std::move(y), x.ortho_tol()), std::move(next)};
}

template <ScalarType T>
AdamState<T> make_adam_state(std::size_t n, std::size_t p, const AdamHyper& hyper) {
  return AdamState<T>{Matrix<T>(n, p), 1, 1, hyper, 0};
}

template <ScalarType T>
AdamStepResult<T> cayley_adam_step(const AdamState<T>& state, const StiefelPoint<T>& x, const Matrix<T>& grad) {
  if (state.step < 1) {
    throw InvalidStep("cayley_adam_step: step counter must start at 1");
  }
  require_gradient(x.mat(), grad, "cayley_adam_step");
  const AdamHyper& h = state.hyper;
  const auto k = static_cast<Real>(state.step);

  Matrix<T> m = momentum_or_zero(state.momentum, x.mat());
  m *= T{h.beta1};
  m.add_scaled(T{1 - h.beta1}, grad);

  const Real g_norm = frobenius_norm(grad);
  const Real v = h.beta2 * state.second_moment + (1 - h.beta2) * g_norm * g_norm;
  const Real v_hat = v / (1 - std::pow(h.beta2, k));
  const Real r = (1 - std::pow(h.beta1, k)) * std::sqrt(v_hat + h.eps);

  const SkewOperator<T> w = build_skew(x, m).scaled(1 / r);
  m = matmul(w.mat(), x.mat());
  m *= T{r};

  const Real alpha = adaptive_alpha(h.lr, w, h.q, h.eps);
  Matrix<T> y;
  if (h.retraction == Retraction::ClosedForm) {
    y = cayley_closed(x, w, -alpha).mat();
  } else {
    Matrix<T> y0 = x.mat();
    y0.add_scaled(T{-alpha}, m);
    y = cayley_iterative(x, w, -alpha, h.s, y0);
  }

  AdamState<T> next{std::move(m), v, state.step + 1, h, alpha};
  return {StiefelPoint<T>(std::move(y), x.ortho_tol()), std::move(next)};
}

template <ScalarType T>
EuclidSgdResult<T> euclid_sgd_step(const Matrix<T>& momentum, const Matrix<T>& x, const Matrix<T>& grad,
                                   Real lr, Real beta) {
  require_gradient(x, grad, "euclid_sgd_step");
  Matrix<T> m = momentum_or_zero(momentum, x);
  m *= T{beta};
  m -= grad;
  Matrix<T> next = x;
  next.add_scaled(T{lr}, m);
  return {std::move(next), std::move(m)};
}

template <ScalarType T>
EuclidAdamState<T> make_euclid_adam_state(std::size_t rows, std::size_t cols, const EuclidAdamHyper& hyper) {
  return EuclidAdamState<T>{Matrix<T>(rows, cols), Matrix<Real>(rows, cols), 1, hyper};
}

template <ScalarType T>
EuclidAdamResult<T> euclid_adam_step(const EuclidAdamState<T>& state, const Matrix<T>& x, const Matrix<T>& grad) {
  if (state.step < 1) {
    throw InvalidStep("euclid_adam_step: step counter must start at 1");
  }
  require_gradient(x, grad, "euclid_adam_step");
  const EuclidAdamHyper& h = state.hyper;
  EuclidAdamState<T> next = state;
  if (next.m.empty()) next.m = Matrix<T>(x.rows(), x.cols());
  if (next.v.empty()) next.v = Matrix<Real>(x.rows(), x.cols());
  if (!next.m.same_shape(x) || next.v.rows() != x.rows() || next.v.cols() != x.cols()) {
    throw PreconditionError("euclid_adam_step: state shape differs from the parameter");
  }

  const auto k = static_cast<Real>(state.step);
  const Real c1 = 1 - std::pow(h.beta1, k);
  const Real c2 = 1 - std::pow(h.beta2, k);
  Matrix<T> out = x;
  auto m = next.m.data();
  auto v = next.v.data();
  auto g = grad.data();
  auto xo = out.data();
  for (std::size_t i = 0; i < xo.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1 - h.beta2) * abs2(g[i]);
    const T m_hat = m[i] / c1;
    const Real v_hat = v[i] / c2;
    xo[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
  next.step = state.step + 1;
  return {std::move(out), std::move(next)};
}

template <ScalarType T>
void group_step(std::vector<ParamGroup<T>>& groups, const std::vector<std::vector<Matrix<T>>>& grads,
                Real lr_scale) {
  if (grads.size() != groups.size()) {
    throw PreconditionError("group_step: one gradient list per group is required");
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const ParamGroup<T>& group = groups[g];
    if (grads[g].size() != group.params.size()) {
      throw PreconditionError("group_step: gradient count differs from parameter count");
    }
    if (group.kind == GroupKind::Stiefel && group.weight_decay != 0) {
      throw PreconditionError("group_step: weight decay is not defined for Stiefel parameters");
    }
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      const auto& p = group.params[i];
      require_gradient(p.value, grads[g][i], "group_step");
      if (group.kind == GroupKind::Stiefel && p.value.rows() < p.value.cols()) {
        throw PreconditionError("group_step: Stiefel parameter '" + p.name + "' must be stored n x p with n >= p");
      }
    }
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    ParamGroup<T>& group = groups[g];
    const Real lr = group.lr * lr_scale;
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      Parameter<T>& p = group.params[i];
      const Matrix<T>& grad = grads[g][i];
      const std::size_t rows = p.value.rows();
      const std::size_t cols = p.value.cols();

      if (group.kind == GroupKind::Stiefel) {
        const StiefelPoint<T> x(p.value, group.ortho_tol);
        if (group.method == Method::Sgd) {
          if (!std::holds_alternative<SgdState<T>>(p.state)) {
            p.state = make_sgd_state<T>(rows, cols);
          }
          auto& st = std::get<SgdState<T>>(p.state);
          st.hyper = SgdHyper{lr, group.beta1, group.q, group.eps, group.s, Retraction::Iterative};
          auto res = cayley_sgd_step(st, x, grad);
          p.value = res.point.mat();
          st = std::move(res.state);
          p.last_alpha = st.last_alpha;
        } else {
          if (!std::holds_alternative<AdamState<T>>(p.state)) {
            p.state = make_adam_state<T>(rows, cols);
          }
          auto& st = std::get<AdamState<T>>(p.state);
          st.hyper = AdamHyper{lr, group.beta1, group.beta2, group.q, group.eps, group.s, Retraction::Iterative};
          auto res = cayley_adam_step(st, x, grad);
          p.value = res.point.mat();
          st = std::move(res.state);
          p.last_alpha = st.last_alpha;
        }
        continue;
      }

      Matrix<T> g_eff = grad;
      if (group.weight_decay != 0) g_eff.add_scaled(T{group.weight_decay}, p.value);
      if (group.method == Method::Sgd) {
        if (!std::holds_alternative<EuclidSgdState<T>>(p.state)) {
          p.state = EuclidSgdState<T>{Matrix<T>(rows, cols)};
        }
        auto& st = std::get<EuclidSgdState<T>>(p.state);
        auto res = euclid_sgd_step(st.momentum, p.value, g_eff, lr, group.beta1);
        p.value = std::move(res.x);
        st.momentum = std::move(res.momentum);
      } else {
        if (!std::holds_alternative<EuclidAdamState<T>>(p.state)) {
          p.state = make_euclid_adam_state<T>(rows, cols);
        }
        auto& st = std::get<EuclidAdamState<T>>(p.state);
        st.hyper = EuclidAdamHyper{lr, group.beta1, group.beta2, group.eps};
        auto res = euclid_adam_step(st, p.value, g_eff);
        p.value = std::move(res.x);
        st = std::move(res.state);
      }
      p.last_alpha = lr;
    }
  }
}

Real lr_schedule(std::int64_t step, Real base_lr, std::span<const std::int64_t> milestones, Real factor) {
  if (!std::is_sorted(milestones.begin(), milestones.end())) {
    throw PreconditionError("lr_schedule: milestones must be sorted ascending");
  }
  const auto passed = std::upper_bound(milestones.begin(), milestones.end(), step) - milestones.begin();
  return base_lr * std::pow(factor, static_cast<Real>(passed));
}

#define STIEFEL_INSTANTIATE_OPTIMIZERS(T)                                                                  \
  template SgdState<T> make_sgd_state<T>(std::size_t, std::size_t, const SgdHyper&);                       \
  template SgdStepResult<T> cayley_sgd_step(const SgdState<T>&, const StiefelPoint<T>&, const Matrix<T>&); \
  template AdamState<T> make_adam_state<T>(std::size_t, std::size_t, const AdamHyper&);                    \
  template AdamStepResult<T> cayley_adam_step(const AdamState<T>&, const StiefelPoint<T>&,                 \
                                              const Matrix<T>&);                                           \
  template EuclidSgdResult<T> euclid_sgd_step(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&, Real,  \
                                              Real);                                                       \
  template EuclidAdamState<T> make_euclid_adam_state<T>(std::size_t, std::size_t, const EuclidAdamHyper&); \
  template EuclidAdamResult<T> euclid_adam_step(const EuclidAdamState<T>&, const Matrix<T>&,               \
                                                const Matrix<T>&);                                         \
  template void group_step(std::vector<ParamGroup<T>>&, const std::vector<std::vector<Matrix<T>>>&, Real);

STIEFEL_INSTANTIATE_OPTIMIZERS(Real)
STIEFEL_INSTANTIATE_OPTIMIZERS(Complex)

#undef STIEFEL_INSTANTIATE_OPTIMIZERS

}  // namespace stiefel
