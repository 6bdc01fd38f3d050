#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "stiefel/experiments.hpp"
#include "stiefel/problems.hpp"

using namespace stiefel;

namespace {

std::vector<ExperimentRecord> run(ExperimentConfig config) {
  std::vector<ExperimentRecord> records;
  auto summary = run_optimize(config, [&](const ExperimentRecord& r, bool) { records.push_back(r); });
  EXPECT_FALSE(summary.non_finite) << summary.message;
  return records;
}

Real max_error(const std::vector<ExperimentRecord>& records) {
  Real worst = 0;
  for (const auto& r : records) worst = std::max(worst, r.ortho_error);
  return worst;
}

struct DriftCase {
  ProblemKind problem;
  OptimizerKind optimizer;
  Field field;
  Real lr;
  std::int64_t steps;
  Real bound;
};

class DriftBound : public ::testing::TestWithParam<DriftCase> {};

}  // namespace

TEST_P(DriftBound, OrthonormalityHeldWithoutReprojection) {
  const auto& c = GetParam();
  ExperimentConfig config;
  config.problem = c.problem;
  config.optimizer = c.optimizer;
  config.field = c.field;
  config.lr = c.lr;
  config.steps = c.steps;
  EXPECT_LE(max_error(run(config)), c.bound);
}

INSTANTIATE_TEST_SUITE_P(
    ShortRuns, DriftBound,
    ::testing::Values(DriftCase{ProblemKind::Subspace, OptimizerKind::CayleySgd, Field::Real, 1e-3, 1000, 1e-5},
                      DriftCase{ProblemKind::Subspace, OptimizerKind::CayleyAdam, Field::Real, 0.02, 1000, 1e-5},
                      DriftCase{ProblemKind::Subspace, OptimizerKind::CayleySgd, Field::Complex, 1e-3, 1000, 1e-5},
                      DriftCase{ProblemKind::Subspace, OptimizerKind::CayleyAdam, Field::Complex, 0.02, 1000, 1e-5}));

INSTANTIATE_TEST_SUITE_P(
    LongRuns, DriftBound,
    ::testing::Values(DriftCase{ProblemKind::Subspace, OptimizerKind::CayleySgd, Field::Real, 3e-3, 10000, 1e-4},
                      DriftCase{ProblemKind::Subspace, OptimizerKind::CayleyAdam, Field::Real, 0.05, 10000, 1e-4},
                      DriftCase{ProblemKind::Procrustes, OptimizerKind::CayleySgd, Field::Real, 1e-4, 10000, 1e-4},
                      DriftCase{ProblemKind::Procrustes, OptimizerKind::CayleyAdam, Field::Real, 0.01, 10000, 1e-4}));

TEST(Descent, PlainStepsDecreaseTheLoss) {
  for (auto problem : {ProblemKind::Subspace, ProblemKind::Procrustes}) {
    ExperimentConfig config;
    config.problem = problem;
    config.beta = 0;
    config.lr = 1e-3;
    config.steps = 1000;
    auto records = run(config);
    std::size_t decreases = 0;
    for (std::size_t i = 1; i < records.size(); ++i) decreases += records[i].loss < records[i - 1].loss;
    EXPECT_GE(static_cast<Real>(decreases), 0.99 * static_cast<Real>(records.size() - 1));
  }
}

TEST(Convergence, RiemannianGradientVanishes) {
  ExperimentConfig config;
  config.lr = 3e-3;
  config.steps = 10000;
  auto records = run(config);
  auto min_sq = [&](std::size_t upto) {
    Real best = std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < upto; ++i) best = std::min(best, records[i].riem_grad_norm * records[i].riem_grad_norm);
    return best;
  };
  Real early = min_sq(100);
  Real late = min_sq(records.size());
  EXPECT_LE(late, 1e-6);
  EXPECT_LE(late, 1e-3 * early);
}

TEST(Convergence, SubspaceReachesOptimumWithSmallStepCap) {
  ExperimentConfig config;
  config.steps = 5000;
  config.q = 0.003;
  RunSummary summary = run_optimize(config, [](const ExperimentRecord&, bool) {});
  ASSERT_TRUE(summary.optimum.has_value());
  EXPECT_LE(summary.best_loss - *summary.optimum, 1e-6);
}

TEST(ToyNetTraining, LossNonIncreasingOverWindows) {
  Rng rng(1);
  ToyNetConfig config;
  config.beta1 = 0;
  config.lr_euclidean = 1e-3;
  config.lr_stiefel = 1e-3;
  auto net = make_toynet(rng, config);
  std::vector<Real> losses{net.loss()};
  for (int k = 0; k < 500; ++k) {
    net.step();
    losses.push_back(net.loss());
  }
  for (std::size_t k = 0; k + 50 < losses.size(); ++k) ASSERT_LE(losses[k + 50], losses[k]) << "window at " << k;
}
