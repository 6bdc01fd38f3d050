#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stiefel/matrix.hpp"

namespace stiefel {

enum class OptimizerKind { CayleySgd, CayleyAdam, Sgd, Adam };
enum class ProblemKind { Procrustes, Subspace, ToyNet };

std::optional<OptimizerKind> parse_optimizer(std::string_view name);
std::optional<ProblemKind> parse_problem(std::string_view name);
std::optional<Field> parse_field(std::string_view name);
std::string_view to_string(OptimizerKind kind);
std::string_view to_string(ProblemKind kind);
std::string_view to_string(Field field);

/// Runs the given number of tasks on up to `jobs` threads. Tasks must not
/// share mutable state; the first exception thrown is rethrown here.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

// ---------------------------------------------------------------------------
// CSV records
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader = "schema=1,step,loss,riem_grad_norm,ortho_error,alpha_used,wall_ms";

struct ExperimentRecord {
  std::int64_t step = 0;
  Real loss = 0;
  Real riem_grad_norm = 0;
  Real ortho_error = 0;
  Real alpha_used = 0;
  Real wall_ms = 0;
};

/// Shortest decimal that reads back to the same double.
std::string format_real(Real value);

/// One CSV line without the newline; the schema column holds the version.
std::string csv_row(const ExperimentRecord& record);

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  ProblemKind problem = ProblemKind::Subspace;
  OptimizerKind optimizer = OptimizerKind::CayleySgd;
  Field field = Field::Real;
  std::optional<std::size_t> n;  ///< problem default when unset
  std::optional<std::size_t> p;
  std::int64_t steps = 1000;
  std::uint64_t seed = 1;
  std::optional<Real> lr;  ///< optimizer default when unset
  Real beta = 0.9;         ///< heavy-ball coefficient (cayley-sgd, sgd)
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t s = 2;
  Real lr_euclidean = 0.01;  ///< toynet only: rate of the unconstrained group
  std::int64_t log_every = 1;

  /// Throws PreconditionError naming the first bad setting.
  void validate() const;

  std::size_t resolved_n() const;
  std::size_t resolved_p() const;
  Real resolved_lr() const;
};

/// Defaults: 0.2 for cayley-sgd, 0.4 for cayley-adam; 0.01 and 1e-3
/// for the Euclidean baselines.
Real default_lr(OptimizerKind kind);

struct RunSummary {
  std::int64_t steps_run = 0;
  Real initial_loss = 0;
  Real final_loss = 0;
  Real best_loss = std::numeric_limits<Real>::infinity();
  Real max_ortho_error = 0;
  Real final_ortho_error = 0;
  std::optional<Real> optimum;
  bool non_finite = false;  ///< stopped on a NaN/Inf loss or gradient
  std::string message;
};

/// Called after every step with that step's record; `logged` tells whether
/// the step falls on the log interval (or is the last one).
using StepSink = std::function<void(const ExperimentRecord& record, bool logged)>;

/// Builds the configured problem from the seed and runs it. Points are
/// never re-orthonormalized: drift is what the ortho_error column tracks.
RunSummary run_optimize(const ExperimentConfig& config, const StepSink& sink);

// ---------------------------------------------------------------------------
// retraction-check
// ---------------------------------------------------------------------------

struct RetractionSuiteConfig {
  std::uint64_t seed = 1;
  std::vector<std::pair<std::size_t, std::size_t>> sizes{{16, 4}, {64, 16}, {116, 116}};
  std::size_t velocity_cases = 50;     ///< split across sizes
  std::size_t contraction_cases = 50;
  std::size_t order_cases = 20;
  bool guard_disabled = false;  ///< alpha = 4 sqrt(n) / ||W||_F, past the contraction bound
  std::size_t jobs = 1;
};

struct RetractionCase {
  std::string test;  ///< velocity, contraction, order, zero-w or divergence
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t index = 0;
  Real value = 0;    ///< headline number of the test (see RetractionSuiteResult)
  Real bound = 0;
  bool passed = false;
  std::string detail;
};

/// velocity:    Y(0) = X to 1e-14 and c1(h)/c1(h/2) in [1.8, 2.2] (value = ratio)
/// contraction: r_{i+1}/r_i <= alpha ||W||_F / 2 + 1e-6 for i = 0..5
///              (value = worst ratio minus its bound)
/// order:       ||Y^2 - Y(alpha)|| shrinks by >= 2^3.5 per halving of
///              alpha in {0.2, 0.1, 0.05} (value = smallest factor)
/// zero-w:      W = 0 leaves X fixed under both transforms
/// divergence:  guard disabled; passes when r_6 > r_0
struct RetractionSuiteResult {
  std::vector<RetractionCase> cases;
  bool all_passed() const;
  bool passed(std::string_view test) const;
};

RetractionSuiteResult run_retraction_suite(const RetractionSuiteConfig& config);

// ---------------------------------------------------------------------------
// unitary-check
// ---------------------------------------------------------------------------

struct UnitaryConfig {
  std::vector<std::size_t> sizes{116, 512};
  std::size_t p = 16;
  std::int64_t steps = 200;
  Real lr = 0.002;
  Real beta = 0.9;
  Real q = 0.5;
  Real eps = 1e-8;
  std::size_t max_s = 4;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

struct UnitaryRow {
  std::size_t n = 0;
  std::string variant;       ///< "s=0" .. "s=4" or "closed"
  std::optional<std::size_t> s;
  Real mean_error = 0;       ///< running mean of ||X^H X - I||_F over the steps
  Real final_error = 0;
  Real final_loss = 0;
  bool diverged = false;     ///< non-finite values or a rejected step
};

struct UnitaryVerdict {
  std::size_t n = 0;
  bool monotone = false;     ///< e_0 > e_1 > e_2 > e_3
  bool s2_bound = false;     ///< e_2 <= 1e-4
  bool saturated = false;    ///< e_s <= 1e-4 for s >= 2 and e_2 - min_{s>=3} e_s <= 0.05 (e_0 - e_2)
  bool passed() const { return monotone && s2_bound && saturated; }
};

struct UnitaryResult {
  std::vector<UnitaryRow> rows;
  std::vector<UnitaryVerdict> verdicts;
  bool passed() const;
};

/// Cayley SGD on a complex dominant-subspace problem per size, once per
/// iteration count s = 0..max_s and once with the closed-form transform,
/// all from the same start.
UnitaryResult run_unitary_check(const UnitaryConfig& config);

// ---------------------------------------------------------------------------
// speed
// ---------------------------------------------------------------------------

struct SpeedConfig {
  std::vector<std::pair<std::size_t, std::size_t>> sizes{{8, 2}, {64, 64}, {512, 16}, {512, 512}};
  std::size_t reps = 100;
  std::size_t warmup = 3;
  std::size_t s = 2;
  std::uint64_t seed = 1;
};

struct SpeedRow {
  std::size_t n = 0;
  std::size_t p = 0;
  Real iterative_ms = 0;  ///< median
  Real closed_ms = 0;     ///< median
  Real ratio() const { return iterative_ms / closed_ms; }
};

/// Times one update from the same (X, W, alpha): the iterative transform
/// forms Y^0 = X + alpha W X and runs s iterations, the closed form runs
/// the LU solve. Real scalars.
std::vector<SpeedRow> run_speed(const SpeedConfig& config);

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckConfig {
  std::uint64_t seed = 1;
  std::size_t points = 20;  ///< random base points per problem
  std::size_t trials = 3;   ///< directions per point
  Real tolerance = 1e-4;
  bool corrupt_gradient = false;  ///< doubles every analytic gradient (negative control)
  std::size_t jobs = 1;
};

struct GradcheckRow {
  std::string problem;
  std::size_t points = 0;
  Real max_rel_error = 0;
  bool passed = false;
};

/// fd_check on real and complex Procrustes and subspace problems, the toy
/// network's constrained layer, and the toy network's Euclidean weights.
std::vector<GradcheckRow> run_gradcheck(const GradcheckConfig& config);

}  // namespace stiefel
