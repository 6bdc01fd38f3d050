#include "stiefel/problems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "stiefel/linalg.hpp"

namespace stiefel {
namespace {

// Flips the first column of a real square point when det < 0 so that it
// lies in SO(n). Complex points are returned unchanged (U(n) is connected).
template <ScalarType T>
StiefelPoint<T> to_identity_component(const StiefelPoint<T>& x) {
  if constexpr (is_complex<T>::value) {
    return x;
  } else {
    if (x.n() != x.p() || determinant(x.mat()) > 0) return x;
    Matrix<T> flipped = x.mat();
    for (std::size_t i = 0; i < flipped.rows(); ++i) flipped(i, 0) = -flipped(i, 0);
    return StiefelPoint<T>(std::move(flipped), x.ortho_tol());
  }
}

Real relative_error(Real fd, Real analytic, Real f_value) {
  const Real floor = 1e-6 * std::max<Real>(1, std::abs(f_value));
  return std::abs(fd - analytic) / std::max(std::abs(fd), floor);
}

}  // namespace

template <ScalarType T>
Problem<T> make_procrustes(Rng& rng, std::size_t n) {
  if (n == 0) {
    throw PreconditionError("make_procrustes: n must be positive");
  }
  const Matrix<T> a = gaussian_matrix<T>(rng, n, n);
  const StiefelPoint<T> q = to_identity_component(random_point<T>(rng, n, n));
  const Matrix<T> b = matmul(a, q.mat());
  const Matrix<T> ah = conj_transpose(a);

  Problem<T> pr;
  pr.name = "procrustes";
  pr.n = n;
  pr.p = n;
  pr.eval = [a, b](const Matrix<T>& x) {
    const Real r = frobenius_norm(matmul(a, x) - b);
    return r * r;
  };
  pr.grad = [a, ah, b](const Matrix<T>& x) {
    Matrix<T> g = matmul(ah, matmul(a, x) - b);
    g *= T{2};
    return g;
  };
  pr.optimum = 0.0;
  pr.planted = q.mat();
  pr.sample_start = [n](Rng& r) { return to_identity_component(random_point<T>(r, n, n)); };
  return pr;
}

std::vector<Real> gapped_spectrum(Rng& rng, std::size_t n, std::size_t p) {
  if (p == 0 || p > n) {
    throw PreconditionError("gapped_spectrum: needs 1 <= p <= n");
  }
  std::vector<Real> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i < p ? rng.uniform(1.5, 2.5) : rng.uniform(0.1, 1.0);
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

template <ScalarType T>
Problem<T> make_subspace(Rng& rng, std::size_t n, std::size_t p, const std::vector<Real>& spectrum) {
  if (p == 0 || p > n) {
    throw PreconditionError("make_subspace: needs 1 <= p <= n");
  }
  if (spectrum.size() != n) {
    throw PreconditionError("make_subspace: spectrum must have n values");
  }
  if (!std::is_sorted(spectrum.begin(), spectrum.end(), std::greater<>()) || !(spectrum.back() > 0)) {
    throw PreconditionError("make_subspace: spectrum must be positive and descending");
  }
  const Matrix<T> q = random_point<T>(rng, n, n).mat();
  Matrix<T> q_scaled = q;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) q_scaled(i, j) *= spectrum[j];
  }
  Matrix<T> a = matmul(q_scaled, conj_transpose(q));
  a = T{0.5} * (a + conj_transpose(a));

  Matrix<T> planted(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) planted(i, j) = q(i, j);
  }

  Problem<T> pr;
  pr.name = "subspace";
  pr.n = n;
  pr.p = p;
  pr.eval = [a](const Matrix<T>& x) { return -inner_product(x, matmul(a, x)); };
  pr.grad = [a](const Matrix<T>& x) {
    Matrix<T> g = matmul(a, x);
    g *= T{-2};
    return g;
  };
  pr.optimum = -std::accumulate(spectrum.begin(), spectrum.begin() + static_cast<std::ptrdiff_t>(p), 0.0);
  pr.planted = std::move(planted);
  pr.sample_start = [n, p](Rng& r) { return random_point<T>(r, n, p); };
  return pr;
}

template <ScalarType T>
StiefelPoint<T> stiefel_adapter_to_internal(const Matrix<T>& k, Real ortho_tol) {
  if (k.empty() || k.rows() > k.cols()) {
    throw PreconditionError("stiefel adapter: row-orthonormal weight must be p x n with p <= n");
  }
  return StiefelPoint<T>(conj_transpose(k), ortho_tol);
}

template <ScalarType T>
Matrix<T> stiefel_adapter_from_internal(const StiefelPoint<T>& x) {
  return conj_transpose(x.mat());
}

template <ScalarType T>
FdReport fd_check(const Problem<T>& problem, const StiefelPoint<T>& x, Rng& rng, std::size_t trials, Real eps) {
  if (trials == 0) {
    throw PreconditionError("fd_check: trials must be at least 1");
  }
  const Real f0 = problem.eval(x.mat());
  const Matrix<T> riem_grad = tangent_project(x, problem.grad(x.mat())).mat();
  FdReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    Matrix<T> v = tangent_project(x, gaussian_matrix<T>(rng, x.n(), x.p())).mat();
    v *= T{1 / frobenius_norm(v)};
    const SkewOperator<T> w = build_skew(x, v);
    const Real forward = problem.eval(cayley_closed(x, w, eps).mat());
    const Real backward = problem.eval(cayley_closed(x, w, -eps).mat());
    const Real fd = (forward - backward) / (2 * eps);
    const Real analytic = inner_product(v, riem_grad);
    report.max_rel_error = std::max(report.max_rel_error, relative_error(fd, analytic, f0));
    report.max_abs_fd = std::max(report.max_abs_fd, std::abs(fd));
    report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(analytic));
  }
  return report;
}

// ---------------------------------------------------------------------------
// ToyNet
// ---------------------------------------------------------------------------

struct ToyNet::Grads {
  RealMatrix w1, b1, k, b2, w3, b3;
};

namespace {

RealMatrix add_bias_tanh(RealMatrix pre, const RealMatrix& bias) {
  for (std::size_t i = 0; i < pre.rows(); ++i) {
    for (std::size_t j = 0; j < pre.cols(); ++j) pre(i, j) = std::tanh(pre(i, j) + bias(j, 0));
  }
  return pre;
}

RealMatrix column_sums(const RealMatrix& m) {
  RealMatrix s(m.cols(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) s(j, 0) += m(i, j);
  }
  return s;
}

// d tanh: g * (1 - h^2), elementwise.
RealMatrix tanh_backward(RealMatrix g, const RealMatrix& h) {
  auto gd = g.data();
  auto hd = h.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= 1 - hd[i] * hd[i];
  return g;
}

struct Forward {
  RealMatrix h1, h2, logits;
};

Forward forward(const RealMatrix& inputs, const RealMatrix& w1, const RealMatrix& b1, const RealMatrix& k,
                const RealMatrix& b2, const RealMatrix& w3, const RealMatrix& b3) {
  Forward f;
  f.h1 = add_bias_tanh(matmul(inputs, conj_transpose(w1)), b1);
  f.h2 = add_bias_tanh(matmul(f.h1, conj_transpose(k)), b2);
  f.logits = matmul(f.h2, conj_transpose(w3));
  for (std::size_t i = 0; i < f.logits.rows(); ++i) {
    for (std::size_t j = 0; j < f.logits.cols(); ++j) f.logits(i, j) += b3(j, 0);
  }
  return f;
}

// Mean cross-entropy; fills `dlogits` with its gradient when non-null.
Real cross_entropy(const RealMatrix& logits, const std::vector<int>& labels, RealMatrix* dlogits) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  Real total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    const Real zmax = *std::max_element(z.begin(), z.end());
    Real sum = 0;
    for (const Real v : z) sum += std::exp(v - zmax);
    const Real lse = zmax + std::log(sum);
    total += lse - z[static_cast<std::size_t>(labels[i])];
    if (dlogits != nullptr) {
      for (std::size_t j = 0; j < c; ++j) {
        const Real prob = std::exp(z[j] - lse);
        (*dlogits)(i, j) = (prob - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0)) / static_cast<Real>(n);
      }
    }
  }
  return total / static_cast<Real>(n);
}

}  // namespace

ToyNet::ToyNet(RealMatrix inputs, std::vector<int> labels, std::vector<ParamGroup<Real>> groups, ToyNetConfig config)
    : inputs_(std::move(inputs)), labels_(std::move(labels)), groups_(std::move(groups)), config_(config) {}

const RealMatrix& ToyNet::param(const char* name) const {
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      if (p.name == name) return p.value;
    }
  }
  throw PreconditionError(std::string("ToyNet: no parameter named ") + name);
}

RealMatrix& ToyNet::param_mut(const char* name) {
  return const_cast<RealMatrix&>(std::as_const(*this).param(name));
}

RealMatrix ToyNet::constrained_weight() const {
  const RealMatrix& k = param("K");
  return config_.constrain ? conj_transpose(k) : k;
}

Real ToyNet::constrained_error() const {
  return orthonormality_error(conj_transpose(constrained_weight()));
}

Real ToyNet::constrained_alpha() const {
  for (const auto& g : groups_) {
    for (const auto& p : g.params) {
      if (p.name == "K") return p.last_alpha;
    }
  }
  return 0;
}

Real ToyNet::loss_with(const RealMatrix& k_rows) const {
  const Forward f =
      forward(inputs_, param("W1"), param("b1"), k_rows, param("b2"), param("W3"), param("b3"));
  return cross_entropy(f.logits, labels_, nullptr);
}

Real ToyNet::loss() const { return loss_with(constrained_weight()); }

Real ToyNet::accuracy() const {
  const Forward f =
      forward(inputs_, param("W1"), param("b1"), constrained_weight(), param("b2"), param("W3"), param("b3"));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < f.logits.rows(); ++i) {
    const auto z = f.logits.row(i);
    const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    hits += best == labels_[i] ? 1 : 0;
  }
  return static_cast<Real>(hits) / static_cast<Real>(labels_.size());
}

ToyNet::Grads ToyNet::backprop() const {
  const RealMatrix& w1 = param("W1");
  const RealMatrix& w3 = param("W3");
  const RealMatrix k = constrained_weight();
  const Forward f = forward(inputs_, w1, param("b1"), k, param("b2"), w3, param("b3"));

  RealMatrix dlogits(f.logits.rows(), f.logits.cols());
  cross_entropy(f.logits, labels_, &dlogits);

  Grads g;
  g.w3 = matmul(conj_transpose(dlogits), f.h2);
  g.b3 = column_sums(dlogits);
  const RealMatrix da2 = tanh_backward(matmul(dlogits, w3), f.h2);
  g.k = matmul(conj_transpose(da2), f.h1);
  g.b2 = column_sums(da2);
  const RealMatrix da1 = tanh_backward(matmul(da2, k), f.h1);
  g.w1 = matmul(conj_transpose(da1), inputs_);
  g.b1 = column_sums(da1);
  return g;
}

std::vector<std::vector<RealMatrix>> ToyNet::gradients() const {
  const Grads g = backprop();
  std::vector<std::vector<RealMatrix>> out;
  for (const auto& group : groups_) {
    std::vector<RealMatrix> gg;
    for (const auto& p : group.params) {
      if (p.name == "W1") gg.push_back(g.w1);
      else if (p.name == "b1") gg.push_back(g.b1);
      else if (p.name == "b2") gg.push_back(g.b2);
      else if (p.name == "W3") gg.push_back(g.w3);
      else if (p.name == "b3") gg.push_back(g.b3);
      else if (p.name == "K") gg.push_back(group.kind == GroupKind::Stiefel ? conj_transpose(g.k) : g.k);
      else throw PreconditionError("ToyNet: unknown parameter " + p.name);
    }
    out.push_back(std::move(gg));
  }
  return out;
}

void ToyNet::step(Real lr_scale) { group_step(groups_, gradients(), lr_scale); }

Problem<Real> ToyNet::constrained_problem() const {
  if (!config_.constrain) {
    throw PreconditionError("ToyNet: constrained_problem needs the constrained configuration");
  }
  Problem<Real> pr;
  pr.name = "toynet";
  pr.n = config_.hidden;
  pr.p = config_.constrained;
  // The net is captured by value: the problem stays valid on its own.
  const ToyNet net = *this;
  pr.eval = [net](const RealMatrix& x) { return net.loss_with(conj_transpose(x)); };
  pr.grad = [net](const RealMatrix& x) {
    ToyNet probe = net;
    probe.param_mut("K") = x;
    return conj_transpose(probe.backprop().k);
  };
  const std::size_t n = config_.hidden;
  const std::size_t p = config_.constrained;
  pr.sample_start = [n, p](Rng& r) { return random_point<Real>(r, n, p); };
  return pr;
}

Real ToyNet::euclidean_fd_check(Rng& rng, std::size_t trials, Real eps, Real gradient_scale) const {
  if (trials == 0) {
    throw PreconditionError("euclidean_fd_check: trials must be at least 1");
  }
  const auto grads = gradients();
  const Real l0 = loss();
  Real worst = 0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].kind != GroupKind::Euclidean) continue;
    for (std::size_t i = 0; i < groups_[g].params.size(); ++i) {
      const auto& p = groups_[g].params[i];
      for (std::size_t t = 0; t < trials; ++t) {
        RealMatrix d = gaussian_matrix<Real>(rng, p.value.rows(), p.value.cols());
        d *= 1 / frobenius_norm(d);
        ToyNet probe = *this;
        RealMatrix& v = probe.groups_[g].params[i].value;
        v.add_scaled(eps, d);
        const Real forward_loss = probe.loss();
        v.add_scaled(-2 * eps, d);
        const Real backward_loss = probe.loss();
        const Real fd = (forward_loss - backward_loss) / (2 * eps);
        worst = std::max(worst, relative_error(fd, gradient_scale * inner_product(d, grads[g][i]), l0));
      }
    }
  }
  return worst;
}

ToyNet make_toynet(Rng& rng, const ToyNetConfig& config) {
  if (config.input == 0 || config.hidden == 0 || config.constrained == 0 || config.output < 2 ||
      config.samples < 2) {
    throw PreconditionError("make_toynet: layer sizes must be positive, two or more classes and samples");
  }
  if (config.constrained > config.hidden) {
    throw PreconditionError("make_toynet: constrained layer needs p <= n (got p=" +
                            std::to_string(config.constrained) + ", n=" + std::to_string(config.hidden) + ")");
  }
  Rng data_rng = rng.split(1);
  Rng weight_rng = rng.split(2);

  const std::size_t classes = config.output;
  RealMatrix inputs(config.samples, config.input);
  std::vector<int> labels(config.samples);
  const Real offset = config.separation / 2 / std::sqrt(static_cast<Real>(config.input));
  for (std::size_t i = 0; i < config.samples; ++i) {
    const int label = static_cast<int>(i % classes);
    labels[i] = label;
    // Class means sit on the diagonal, evenly spread between -offset and +offset.
    const Real centre = classes == 1 ? 0.0 : offset * (2.0 * label / static_cast<Real>(classes - 1) - 1.0);
    for (std::size_t j = 0; j < config.input; ++j) inputs(i, j) = centre + data_rng.normal();
  }

  auto scaled_gaussian = [&](std::size_t r, std::size_t c, Real scale) {
    RealMatrix m = gaussian_matrix<Real>(weight_rng, r, c);
    m *= scale;
    return m;
  };

  ParamGroup<Real> euclid;
  euclid.kind = GroupKind::Euclidean;
  euclid.method = config.method;
  euclid.lr = config.lr_euclidean;
  euclid.beta1 = config.beta1;
  euclid.beta2 = config.beta2;
  euclid.eps = config.eps;
  euclid.weight_decay = config.weight_decay;
  euclid.params.push_back({"W1", scaled_gaussian(config.hidden, config.input, 1 / std::sqrt(Real(config.input))), {}, 0});
  euclid.params.push_back({"b1", RealMatrix(config.hidden, 1), {}, 0});
  euclid.params.push_back({"b2", RealMatrix(config.constrained, 1), {}, 0});
  euclid.params.push_back({"W3", scaled_gaussian(config.output, config.constrained, 0.1), {}, 0});
  euclid.params.push_back({"b3", RealMatrix(config.output, 1), {}, 0});

  const StiefelPoint<Real> k_internal = random_point<Real>(weight_rng, config.hidden, config.constrained);
  std::vector<ParamGroup<Real>> groups;
  if (config.constrain) {
    ParamGroup<Real> stiefel;
    stiefel.kind = GroupKind::Stiefel;
    stiefel.method = config.method;
    stiefel.lr = config.lr_stiefel;
    stiefel.beta1 = config.beta1;
    stiefel.beta2 = config.beta2;
    stiefel.q = config.q;
    stiefel.eps = config.eps;
    stiefel.s = config.s;
    stiefel.ortho_tol = config.ortho_tol;
    stiefel.params.push_back({"K", k_internal.mat(), {}, 0});
    groups.push_back(std::move(euclid));
    groups.push_back(std::move(stiefel));
  } else {
    euclid.params.push_back({"K", stiefel_adapter_from_internal(k_internal), {}, 0});
    groups.push_back(std::move(euclid));
  }
  return ToyNet(std::move(inputs), std::move(labels), std::move(groups), config);
}

#define STIEFEL_INSTANTIATE_PROBLEMS(T)                                                            \
  template Problem<T> make_procrustes(Rng&, std::size_t);                                          \
  template Problem<T> make_subspace(Rng&, std::size_t, std::size_t, const std::vector<Real>&);     \
  template StiefelPoint<T> stiefel_adapter_to_internal(const Matrix<T>&, Real);                    \
  template Matrix<T> stiefel_adapter_from_internal(const StiefelPoint<T>&);                        \
  template FdReport fd_check(const Problem<T>&, const StiefelPoint<T>&, Rng&, std::size_t, Real);

STIEFEL_INSTANTIATE_PROBLEMS(Real)
STIEFEL_INSTANTIATE_PROBLEMS(Complex)

#undef STIEFEL_INSTANTIATE_PROBLEMS

}  // namespace stiefel
