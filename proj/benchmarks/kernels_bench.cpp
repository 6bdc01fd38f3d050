#include <benchmark/benchmark.h>

#include "stiefel/manifold.hpp"

using namespace stiefel;

namespace {

struct Fixture {
  StiefelPoint<Real> x;
  SkewOperator<Real> w;
  Real alpha;
};

Fixture make_fixture(std::size_t n, std::size_t p) {
  Rng rng(1);
  auto x = random_point<Real>(rng, n, p);
  auto w = build_skew(x, gaussian_matrix<Real>(rng, n, p));
  Real alpha = adaptive_alpha(1.0, w, 0.5, 1e-8);
  return {std::move(x), std::move(w), alpha};
}

void set_sizes(benchmark::internal::Benchmark* b) {
  b->Args({64, 8})->Args({128, 128})->Args({512, 16})->Args({512, 512})->Unit(benchmark::kMillisecond);
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto p = static_cast<std::size_t>(state.range(1));
  auto f = make_fixture(n, p);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(f.w.mat(), f.x.mat()));
}
BENCHMARK(BM_Matmul)->Apply(set_sizes);

// Each update forms W X itself, as a standalone retraction call would.
static void BM_IterativeCayley(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    RealMatrix y0 = f.x.mat();
    y0.add_scaled(f.alpha, matmul(f.w.mat(), f.x.mat()));
    benchmark::DoNotOptimize(cayley_iterative(f.x, f.w, f.alpha, 2, y0));
  }
}
BENCHMARK(BM_IterativeCayley)->Apply(set_sizes);

static void BM_ClosedCayley(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(cayley_closed_matrix(f.x, f.w, f.alpha));
}
BENCHMARK(BM_ClosedCayley)->Apply(set_sizes);

// Inside the optimizers W X is already known from the momentum update, so
// the iterative form only pays for its s products; the closed form still
// needs the LU solve. This is the fairer comparison for in-loop cost.
static void BM_IterativeCayleySharedWX(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  RealMatrix y0 = f.x.mat();
  y0.add_scaled(f.alpha, matmul(f.w.mat(), f.x.mat()));
  for (auto _ : state) benchmark::DoNotOptimize(cayley_iterative(f.x, f.w, f.alpha, 2, y0));
}
BENCHMARK(BM_IterativeCayleySharedWX)->Apply(set_sizes);

static void BM_ClosedCayleySharedWX(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  auto n = f.x.n();
  RealMatrix wx = matmul(f.w.mat(), f.x.mat());
  for (auto _ : state) {
    RealMatrix lhs = RealMatrix::identity(n);
    lhs.add_scaled(-f.alpha / 2, f.w.mat());
    RealMatrix rhs = f.x.mat();
    rhs.add_scaled(f.alpha / 2, wx);
    benchmark::DoNotOptimize(solve_linear(lhs, rhs));
  }
}
BENCHMARK(BM_ClosedCayleySharedWX)->Apply(set_sizes);

static void BM_LuFactor(benchmark::State& state) {
  auto f = make_fixture(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  RealMatrix lhs = RealMatrix::identity(f.x.n());
  lhs.add_scaled(-f.alpha / 2, f.w.mat());
  for (auto _ : state) benchmark::DoNotOptimize(lu_factor(lhs));
}
BENCHMARK(BM_LuFactor)->Apply(set_sizes);

BENCHMARK_MAIN();
