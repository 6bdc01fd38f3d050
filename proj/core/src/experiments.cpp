#include "stiefel/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "stiefel/linalg.hpp"
#include "stiefel/manifold.hpp"
#include "stiefel/optimizers.hpp"
#include "stiefel/problems.hpp"
#include "stiefel/rng.hpp"

namespace stiefel {
namespace {

using Clock = std::chrono::steady_clock;

constexpr Real kUnbounded = std::numeric_limits<Real>::infinity();

Real elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<Real, std::milli>(Clock::now() - since).count();
}

/// ||Z - X sym(X^H Z)||_F, the tangent part of Z at X.
template <ScalarType T>
Real riemannian_norm(const Matrix<T>& x, const Matrix<T>& z) {
  const Matrix<T> xhz = matmul(conj_transpose(x), z);
  Matrix<T> r = z;
  r.add_scaled(T{-0.5}, matmul(x, xhz + conj_transpose(xhz)));
  return frobenius_norm(r);
}

template <ScalarType T>
Matrix<T> plus_scaled(const Matrix<T>& x, Real alpha, const Matrix<T>& d) {
  Matrix<T> out = x;
  out.add_scaled(T{alpha}, d);
  return out;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

class Tracker {
 public:
  Tracker(const ExperimentConfig& config, const StepSink& sink) : config_(config), sink_(sink) {}

  void start(Real loss, Real ortho) {
    summary_.initial_loss = loss;
    summary_.final_loss = loss;
    summary_.best_loss = loss;
    summary_.max_ortho_error = ortho;
    summary_.final_ortho_error = ortho;
    t0_ = Clock::now();
  }

  /// Returns false once the run has to stop.
  bool record(std::int64_t step, Real loss, Real riem, Real ortho, Real alpha) {
    ExperimentRecord rec{step, loss, riem, ortho, alpha, elapsed_ms(t0_)};
    summary_.steps_run = step;
    summary_.final_loss = loss;
    summary_.final_ortho_error = ortho;
    if (std::isfinite(loss)) summary_.best_loss = std::min(summary_.best_loss, loss);
    summary_.max_ortho_error = std::max(summary_.max_ortho_error, ortho);
    const bool finite = std::isfinite(loss);
    const bool logged = !finite || step == config_.steps || step % config_.log_every == 0;
    if (sink_) sink_(rec, logged);
    if (!finite) {
      summary_.non_finite = true;
      summary_.message = "non-finite loss at step " + std::to_string(step);
    }
    return finite;
  }

  void fail(std::int64_t step, const std::exception& e) {
    summary_.non_finite = true;
    summary_.message = "step " + std::to_string(step) + ": " + e.what();
  }

  RunSummary finish(std::optional<Real> optimum) {
    summary_.optimum = optimum;
    return summary_;
  }

 private:
  const ExperimentConfig& config_;
  const StepSink& sink_;
  RunSummary summary_;
  Clock::time_point t0_;
};

template <ScalarType T>
RunSummary optimize_problem(const ExperimentConfig& c, const Problem<T>& pr, Rng& start_rng, const StepSink& sink) {
  const Real lr = c.resolved_lr();
  // Diagnostic runs accept any drift; a NaN still fails the check.
  StiefelPoint<T> point = pr.sample_start(start_rng);
  point = StiefelPoint<T>(point.mat(), kUnbounded);
  Matrix<T> x = point.mat();

  auto sgd = make_sgd_state<T>(pr.n, pr.p, SgdHyper{lr, c.beta, c.q, c.eps, c.s, Retraction::Iterative});
  auto adam = make_adam_state<T>(pr.n, pr.p, AdamHyper{lr, c.beta1, c.beta2, c.q, c.eps, c.s, Retraction::Iterative});
  Matrix<T> heavy_ball(pr.n, pr.p);
  auto euclid_adam = make_euclid_adam_state<T>(pr.n, pr.p, EuclidAdamHyper{lr, c.beta1, c.beta2, c.eps});

  Tracker tracker(c, sink);
  tracker.start(pr.eval(x), orthonormality_error(x));
  Matrix<T> grad = pr.grad(x);
  for (std::int64_t k = 1; k <= c.steps; ++k) {
    Real alpha = lr;
    try {
      switch (c.optimizer) {
        case OptimizerKind::CayleySgd: {
          auto res = cayley_sgd_step(sgd, point, grad);
          point = std::move(res.point);
          sgd = std::move(res.state);
          alpha = sgd.last_alpha;
          x = point.mat();
          break;
        }
        case OptimizerKind::CayleyAdam: {
          auto res = cayley_adam_step(adam, point, grad);
          point = std::move(res.point);
          adam = std::move(res.state);
          alpha = adam.last_alpha;
          x = point.mat();
          break;
        }
        case OptimizerKind::Sgd: {
          auto res = euclid_sgd_step(heavy_ball, x, grad, lr, c.beta);
          x = std::move(res.x);
          heavy_ball = std::move(res.momentum);
          break;
        }
        case OptimizerKind::Adam: {
          auto res = euclid_adam_step(euclid_adam, x, grad);
          x = std::move(res.x);
          euclid_adam = std::move(res.state);
          break;
        }
      }
    } catch (const Error& e) {
      tracker.fail(k, e);
      break;
    }
    const Real loss = pr.eval(x);
    grad = pr.grad(x);
    if (!tracker.record(k, loss, riemannian_norm(x, grad), orthonormality_error(x), alpha)) break;
  }
  return tracker.finish(pr.optimum);
}

RunSummary optimize_toynet(const ExperimentConfig& c, const StepSink& sink) {
  const bool cayley = c.optimizer == OptimizerKind::CayleySgd || c.optimizer == OptimizerKind::CayleyAdam;
  const bool adam = c.optimizer == OptimizerKind::CayleyAdam || c.optimizer == OptimizerKind::Adam;
  ToyNetConfig tc;
  tc.hidden = c.resolved_n();
  tc.constrained = c.resolved_p();
  tc.method = adam ? Method::Adam : Method::Sgd;
  tc.constrain = cayley;
  tc.lr_stiefel = c.resolved_lr();
  tc.lr_euclidean = cayley ? c.lr_euclidean : c.resolved_lr();
  tc.beta1 = adam ? c.beta1 : c.beta;
  tc.beta2 = c.beta2;
  tc.q = c.q;
  tc.eps = c.eps;
  tc.s = c.s;
  tc.ortho_tol = kUnbounded;

  Rng rng(c.seed);
  ToyNet net = make_toynet(rng, tc);

  auto k_grad_internal = [&net]() {
    const auto grads = net.gradients();
    for (std::size_t g = 0; g < net.groups().size(); ++g) {
      const auto& params = net.groups()[g].params;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != "K") continue;
        return net.groups()[g].kind == GroupKind::Stiefel ? grads[g][i] : conj_transpose(grads[g][i]);
      }
    }
    throw PreconditionError("toynet: no K parameter");
  };

  Tracker tracker(c, sink);
  tracker.start(net.loss(), net.constrained_error());
  for (std::int64_t k = 1; k <= c.steps; ++k) {
    try {
      net.step();
    } catch (const Error& e) {
      tracker.fail(k, e);
      break;
    }
    const RealMatrix x = conj_transpose(net.constrained_weight());
    const Real riem = riemannian_norm(x, k_grad_internal());
    if (!tracker.record(k, net.loss(), riem, net.constrained_error(), net.constrained_alpha())) break;
  }
  return tracker.finish(std::nullopt);
}

// ---------------------------------------------------------------------------
// retraction-check helpers
// ---------------------------------------------------------------------------

struct Pair {
  StiefelPoint<Real> x;
  SkewOperator<Real> w;
};

Pair random_pair(Rng& rng, std::size_t n, std::size_t p, bool unit_norm) {
  StiefelPoint<Real> x = random_point<Real>(rng, n, p);
  SkewOperator<Real> w = build_skew(x, gaussian_matrix<Real>(rng, n, p));
  if (unit_norm) w = w.scaled(1 / w.norm());
  return {std::move(x), std::move(w)};
}

/// r_i = ||Y^i - Y(alpha)||_F for i = 0..count with Y^0 = X + alpha W X.
std::vector<Real> fixed_point_errors(const Pair& pr, Real alpha, std::size_t count) {
  const RealMatrix exact = cayley_closed(pr.x, pr.w, alpha).mat();
  RealMatrix y = plus_scaled(pr.x.mat(), alpha, matmul(pr.w.mat(), pr.x.mat()));
  std::vector<Real> r{frobenius_norm(y - exact)};
  for (std::size_t i = 0; i < count; ++i) {
    y = cayley_iterative(pr.x, pr.w, alpha, 1, y);
    r.push_back(frobenius_norm(y - exact));
  }
  return r;
}

std::string fmt(Real v) { return format_real(v); }

}  // namespace

// ---------------------------------------------------------------------------
// names
// ---------------------------------------------------------------------------

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "cayley-sgd") return OptimizerKind::CayleySgd;
  if (name == "cayley-adam") return OptimizerKind::CayleyAdam;
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

std::optional<ProblemKind> parse_problem(std::string_view name) {
  if (name == "procrustes") return ProblemKind::Procrustes;
  if (name == "subspace") return ProblemKind::Subspace;
  if (name == "toynet") return ProblemKind::ToyNet;
  return std::nullopt;
}

std::optional<Field> parse_field(std::string_view name) {
  if (name == "real") return Field::Real;
  if (name == "complex") return Field::Complex;
  return std::nullopt;
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::CayleySgd: return "cayley-sgd";
    case OptimizerKind::CayleyAdam: return "cayley-adam";
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Procrustes: return "procrustes";
    case ProblemKind::Subspace: return "subspace";
    case ProblemKind::ToyNet: return "toynet";
  }
  return "?";
}

std::string_view to_string(Field field) { return field == Field::Real ? "real" : "complex"; }

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t j = 0; j < jobs; ++j) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string format_real(Real value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string csv_row(const ExperimentRecord& r) {
  std::string line = "1,";
  line += std::to_string(r.step);
  for (Real v : {r.loss, r.riem_grad_norm, r.ortho_error, r.alpha_used, r.wall_ms}) {
    line += ',';
    line += format_real(v);
  }
  return line;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

Real default_lr(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::CayleySgd: return kCayleySgdRates.stiefel;
    case OptimizerKind::CayleyAdam: return kCayleyAdamRates.stiefel;
    case OptimizerKind::Sgd: return 0.01;
    case OptimizerKind::Adam: return 1e-3;
  }
  return 0.01;
}

std::size_t ExperimentConfig::resolved_n() const {
  if (n) return *n;
  switch (problem) {
    case ProblemKind::Procrustes: return p.value_or(16);
    case ProblemKind::Subspace: return 50;
    case ProblemKind::ToyNet: return 16;
  }
  return 0;
}

std::size_t ExperimentConfig::resolved_p() const {
  if (p) return *p;
  switch (problem) {
    case ProblemKind::Procrustes: return resolved_n();
    case ProblemKind::Subspace: return 5;
    case ProblemKind::ToyNet: return 8;
  }
  return 0;
}

Real ExperimentConfig::resolved_lr() const { return lr.value_or(default_lr(optimizer)); }

void ExperimentConfig::validate() const {
  const std::size_t nn = resolved_n();
  const std::size_t pp = resolved_p();
  if (nn == 0 || pp == 0) throw PreconditionError("--n and --p must be at least 1");
  if (pp > nn) throw PreconditionError("--p must not exceed --n");
  if (problem == ProblemKind::Procrustes && pp != nn) {
    throw PreconditionError("procrustes is square: --p must equal --n");
  }
  if (problem == ProblemKind::ToyNet && field == Field::Complex) {
    throw PreconditionError("toynet is real-valued: --scalar complex is not supported");
  }
  if (steps < 0) throw PreconditionError("--steps must be nonnegative");
  if (log_every < 1) throw PreconditionError("--log-every must be at least 1");
  if (!(resolved_lr() > 0) || !std::isfinite(resolved_lr())) throw PreconditionError("--lr must be positive");
  if (!(lr_euclidean > 0) || !std::isfinite(lr_euclidean)) throw PreconditionError("--lr-euclid must be positive");
  if (!(beta >= 0 && beta < 1)) throw PreconditionError("--beta must lie in [0, 1)");
  if (!(beta1 >= 0 && beta1 < 1)) throw PreconditionError("--beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw PreconditionError("--beta2 must lie in [0, 1)");
  if (!(q > 0 && q < 1)) throw PreconditionError("--q must lie in (0, 1)");
  if (!(eps > 0) || !std::isfinite(eps)) throw PreconditionError("--eps must be positive");
}

RunSummary run_optimize(const ExperimentConfig& config, const StepSink& sink) {
  config.validate();
  if (config.problem == ProblemKind::ToyNet) return optimize_toynet(config, sink);

  const std::size_t n = config.resolved_n();
  const std::size_t p = config.resolved_p();
  auto run = [&]<ScalarType T>(std::type_identity<T>) {
    Rng rng(config.seed);
    Problem<T> pr = config.problem == ProblemKind::Procrustes
                        ? make_procrustes<T>(rng, n)
                        : make_subspace<T>(rng, n, p, gapped_spectrum(rng, n, p));
    Rng start_rng = rng.split(7);
    return optimize_problem(config, pr, start_rng, sink);
  };
  return config.field == Field::Real ? run(std::type_identity<Real>{}) : run(std::type_identity<Complex>{});
}

// ---------------------------------------------------------------------------
// retraction-check
// ---------------------------------------------------------------------------

bool RetractionSuiteResult::all_passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const RetractionCase& c) { return c.passed; });
}

bool RetractionSuiteResult::passed(std::string_view test) const {
  bool any = false;
  for (const auto& c : cases) {
    if (c.test != test) continue;
    any = true;
    if (!c.passed) return false;
  }
  return any;
}

RetractionSuiteResult run_retraction_suite(const RetractionSuiteConfig& config) {
  if (config.sizes.empty()) throw PreconditionError("retraction-check: no sizes");
  for (const auto& [n, p] : config.sizes) {
    if (p == 0 || p > n) throw PreconditionError("retraction-check: sizes need 1 <= p <= n");
  }

  struct Job {
    std::string test;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < config.velocity_cases; ++i) jobs.push_back({"velocity", i});
  const char* second = config.guard_disabled ? "divergence" : "contraction";
  for (std::size_t i = 0; i < config.contraction_cases; ++i) jobs.push_back({second, i});
  for (std::size_t i = 0; i < config.order_cases; ++i) jobs.push_back({"order", i});
  for (std::size_t i = 0; i < config.sizes.size(); ++i) jobs.push_back({"zero-w", i});

  std::vector<RetractionCase> cases(jobs.size());
  const Rng base(config.seed);
  parallel_for(jobs.size(), config.jobs, [&](std::size_t j) {
    const Job& job = jobs[j];
    const auto [n, p] = config.sizes[job.index % config.sizes.size()];
    RetractionCase out{job.test, n, p, job.index, 0, 0, false, {}};
    const std::uint64_t family = job.test == "velocity"      ? 1
                                 : job.test == "contraction" ? 2
                                 : job.test == "divergence"  ? 2
                                 : job.test == "order"       ? 3
                                                             : 4;
    Rng rng = base.split(family * 1000003 + job.index);

    if (job.test == "velocity") {
      const Pair pr = random_pair(rng, n, p, true);
      const RetractionCheck rc = retraction_check(pr.x, pr.w);
      out.value = rc.order_ratio();
      out.bound = 2.0;
      out.passed = rc.c0 <= 1e-14 && out.value >= 1.8 && out.value <= 2.2;
      out.detail = "c0=" + fmt(rc.c0) + " c1=" + fmt(rc.c1) + " c1_half=" + fmt(rc.c1_half);
    } else if (job.test == "contraction") {
      const Pair pr = random_pair(rng, n, p, false);
      const Real alpha = adaptive_alpha(1.0, pr.w, 0.5, 1e-8);
      const Real bound = alpha * pr.w.norm() / 2 + 1e-6;
      const std::vector<Real> r = fixed_point_errors(pr, alpha, 6);
      // Iterates already at rounding level carry no contraction information.
      const Real floor = 1e-12 * std::max<Real>(1, frobenius_norm(pr.x.mat()));
      Real worst = -kUnbounded;
      bool ok = true;
      for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        if (r[i] <= floor) break;
        const Real ratio = r[i + 1] / r[i];
        worst = std::max(worst, ratio - bound);
        ok = ok && ratio <= bound;
      }
      out.value = worst;
      out.bound = bound;
      out.passed = ok;
      out.detail = "alpha=" + fmt(alpha) + " r0=" + fmt(r.front()) + " r6=" + fmt(r.back());
    } else if (job.test == "divergence") {
      const Pair pr = random_pair(rng, n, p, false);
      const Real alpha = 4 * std::sqrt(static_cast<Real>(n)) / pr.w.norm();
      const std::vector<Real> r = fixed_point_errors(pr, alpha, 6);
      out.value = r.back() / r.front();
      out.bound = 1;
      out.passed = !std::isfinite(r.back()) || r.back() > r.front();
      out.detail = "alpha*||W||_F/2=" + fmt(alpha * pr.w.norm() / 2) + " r0=" + fmt(r.front()) +
                   " r6=" + fmt(r.back());
    } else if (job.test == "order") {
      const Pair pr = random_pair(rng, n, p, true);
      const Real alphas[] = {0.2, 0.1, 0.05};
      Real e[3];
      for (int a = 0; a < 3; ++a) {
        const RealMatrix y0 = plus_scaled(pr.x.mat(), alphas[a], matmul(pr.w.mat(), pr.x.mat()));
        const RealMatrix y2 = cayley_iterative(pr.x, pr.w, alphas[a], 2, y0);
        e[a] = frobenius_norm(y2 - cayley_closed(pr.x, pr.w, alphas[a]).mat());
      }
      out.value = std::min(e[0] / e[1], e[1] / e[2]);
      out.bound = std::pow(2.0, 3.5);
      out.passed = out.value >= out.bound;
      out.detail = "e(0.2)=" + fmt(e[0]) + " e(0.1)=" + fmt(e[1]) + " e(0.05)=" + fmt(e[2]);
    } else {
      const StiefelPoint<Real> x = random_point<Real>(rng, n, p);
      const auto w = SkewOperator<Real>::zero(n);
      const Real closed = frobenius_norm(cayley_closed(x, w, 0.3).mat() - x.mat());
      const Real iterative = frobenius_norm(cayley_iterative(x, w, 0.3, 2, x.mat()) - x.mat());
      const RetractionCheck rc = retraction_check(x, w);
      out.value = std::max({closed, iterative, rc.c0, rc.c1, rc.c1_half});
      out.bound = 0;
      out.passed = out.value == 0;
      out.detail = "alpha=0.3";
    }
    cases[j] = std::move(out);
  });
  return {std::move(cases)};
}

// ---------------------------------------------------------------------------
// unitary-check
// ---------------------------------------------------------------------------

bool UnitaryResult::passed() const {
  return !verdicts.empty() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const UnitaryVerdict& v) { return v.passed(); });
}

UnitaryResult run_unitary_check(const UnitaryConfig& config) {
  if (config.sizes.empty()) throw PreconditionError("unitary-check: no sizes");
  if (config.max_s < 3) throw PreconditionError("unitary-check: needs s up to at least 3");
  if (config.steps < 1) throw PreconditionError("unitary-check: --steps must be at least 1");
  for (std::size_t n : config.sizes) {
    if (config.p == 0 || config.p > n) throw PreconditionError("unitary-check: needs 1 <= p <= n");
  }

  struct Setup {
    Problem<Complex> problem;
    StiefelPoint<Complex> start;
  };
  std::vector<Setup> setups;
  const Rng base(config.seed);
  for (std::size_t n : config.sizes) {
    Rng rng = base.split(n);
    auto spectrum = gapped_spectrum(rng, n, config.p);
    Problem<Complex> pr = make_subspace<Complex>(rng, n, config.p, spectrum);
    Rng start_rng = rng.split(7);
    StiefelPoint<Complex> start(pr.sample_start(start_rng).mat(), kUnbounded);
    setups.push_back({std::move(pr), std::move(start)});
  }

  const std::size_t variants = config.max_s + 2;
  std::vector<UnitaryRow> rows(config.sizes.size() * variants);
  parallel_for(rows.size(), config.jobs, [&](std::size_t j) {
    const std::size_t which = j / variants;
    const std::size_t v = j % variants;
    const Setup& setup = setups[which];
    const bool closed = v == variants - 1;

    UnitaryRow row;
    row.n = config.sizes[which];
    row.variant = closed ? "closed" : "s=" + std::to_string(v);
    if (!closed) row.s = v;

    SgdHyper hyper{config.lr, config.beta, config.q, config.eps, closed ? 2 : v,
                   closed ? Retraction::ClosedForm : Retraction::Iterative};
    auto state = make_sgd_state<Complex>(row.n, config.p, hyper);
    StiefelPoint<Complex> x = setup.start;
    Real total = 0;
    try {
      for (std::int64_t k = 0; k < config.steps; ++k) {
        auto res = cayley_sgd_step(state, x, setup.problem.grad(x.mat()));
        x = std::move(res.point);
        state = std::move(res.state);
        const Real err = orthonormality_error(x.mat());
        if (!std::isfinite(err)) {
          row.diverged = true;
          break;
        }
        total += err;
        row.final_error = err;
      }
    } catch (const Error&) {
      row.diverged = true;
    }
    if (row.diverged) {
      row.mean_error = kUnbounded;
      row.final_error = kUnbounded;
      row.final_loss = std::numeric_limits<Real>::quiet_NaN();
    } else {
      row.mean_error = total / static_cast<Real>(config.steps);
      row.final_loss = setup.problem.eval(x.mat());
    }
    rows[j] = std::move(row);
  });

  UnitaryResult result{std::move(rows), {}};
  for (std::size_t which = 0; which < config.sizes.size(); ++which) {
    const UnitaryRow* r = &result.rows[which * variants];
    auto e = [&](std::size_t s) { return r[s].mean_error; };
    UnitaryVerdict verdict;
    verdict.n = config.sizes[which];
    verdict.monotone = e(0) > e(1) && e(1) > e(2) && e(2) > e(3);
    verdict.s2_bound = e(2) <= 1e-4;
    Real tail_min = kUnbounded;
    bool tail_small = true;
    for (std::size_t s = 2; s <= config.max_s; ++s) {
      tail_small = tail_small && e(s) <= 1e-4;
      if (s >= 3) tail_min = std::min(tail_min, e(s));
    }
    verdict.saturated = tail_small && e(2) - tail_min <= 0.05 * (e(0) - e(2));
    result.verdicts.push_back(verdict);
  }
  return result;
}

// ---------------------------------------------------------------------------
// speed
// ---------------------------------------------------------------------------

std::vector<SpeedRow> run_speed(const SpeedConfig& config) {
  if (config.reps == 0) throw PreconditionError("speed: --reps must be at least 1");
  for (const auto& [n, p] : config.sizes) {
    if (p == 0 || p > n) throw PreconditionError("speed: sizes need 1 <= p <= n");
  }
  std::vector<SpeedRow> rows;
  const Rng base(config.seed);
  for (const auto& [n, p] : config.sizes) {
    Rng rng = base.split(n * 100003 + p);
    const Pair pr = random_pair(rng, n, p, false);
    const Real alpha = adaptive_alpha(1.0, pr.w, 0.5, 1e-8);

    volatile Real keep = 0;
    auto iterative = [&] {
      const RealMatrix y0 = plus_scaled(pr.x.mat(), alpha, matmul(pr.w.mat(), pr.x.mat()));
      keep = cayley_iterative(pr.x, pr.w, alpha, config.s, y0)(0, 0);
    };
    auto closed = [&] { keep = cayley_closed_matrix(pr.x, pr.w, alpha)(0, 0); };
    auto time_once = [](auto& f) {
      const auto t = Clock::now();
      f();
      return elapsed_ms(t);
    };

    for (std::size_t i = 0; i < config.warmup; ++i) {
      iterative();
      closed();
    }
    std::vector<Real> ti, tc;
    for (std::size_t i = 0; i < config.reps; ++i) {
      ti.push_back(time_once(iterative));
      tc.push_back(time_once(closed));
    }
    auto median = [](std::vector<Real>& v) {
      std::sort(v.begin(), v.end());
      const std::size_t m = v.size() / 2;
      return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2;
    };
    rows.push_back({n, p, median(ti), median(tc)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

std::vector<GradcheckRow> run_gradcheck(const GradcheckConfig& config) {
  if (config.points == 0 || config.trials == 0) {
    throw PreconditionError("gradcheck: --points and --trials must be at least 1");
  }
  const char* names[] = {"procrustes-real",    "procrustes-complex", "subspace-real",
                         "subspace-complex",   "toynet-stiefel",     "toynet-euclidean"};
  constexpr std::size_t kCount = std::size(names);
  std::vector<GradcheckRow> rows(kCount);
  const Rng base(config.seed);

  auto corrupt = [&]<ScalarType T>(Problem<T> pr) {
    if (config.corrupt_gradient) {
      pr.grad = [g = pr.grad](const Matrix<T>& x) {
        Matrix<T> out = g(x);
        out *= T{2};
        return out;
      };
    }
    return pr;
  };
  auto check = [&]<ScalarType T>(const Problem<T>& pr, Rng& rng) {
    Real worst = 0;
    for (std::size_t i = 0; i < config.points; ++i) {
      const StiefelPoint<T> x = pr.sample_start(rng);
      worst = std::max(worst, fd_check(pr, x, rng, config.trials).max_rel_error);
    }
    return worst;
  };

  parallel_for(kCount, config.jobs, [&](std::size_t j) {
    Rng rng = base.split(j + 1);
    Real worst = 0;
    switch (j) {
      case 0: worst = check(corrupt(make_procrustes<Real>(rng, 8)), rng); break;
      case 1: worst = check(corrupt(make_procrustes<Complex>(rng, 8)), rng); break;
      case 2: worst = check(corrupt(make_subspace<Real>(rng, 20, 4, gapped_spectrum(rng, 20, 4))), rng); break;
      case 3: worst = check(corrupt(make_subspace<Complex>(rng, 20, 4, gapped_spectrum(rng, 20, 4))), rng); break;
      case 4: {
        const ToyNet net = make_toynet(rng);
        worst = check(corrupt(net.constrained_problem()), rng);
        break;
      }
      default: {
        // One freshly initialised network per point. The loss is O(1) and
        // directional derivatives can be tiny, so a 1e-6 step is rounding
        // dominated; 1e-4 keeps the truncation error near 1e-9.
        const Real scale = config.corrupt_gradient ? 2.0 : 1.0;
        for (std::size_t i = 0; i < config.points; ++i) {
          Rng net_rng = rng.split(i);
          const ToyNet net = make_toynet(net_rng);
          worst = std::max(worst, net.euclidean_fd_check(rng, config.trials, 1e-4, scale));
        }
        break;
      }
    }
    rows[j] = {names[j], config.points, worst, worst <= config.tolerance};
  });
  return rows;
}

}  // namespace stiefel
