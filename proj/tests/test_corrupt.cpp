#include <random>

#include <gtest/gtest.h>

#include "pgo/corrupt.hpp"
#include "pgo/synthetic.hpp"
#include "test_util.hpp"

namespace pgo {
namespace {

// Chain of n vertices with `loops` consistent loop closures at id gap >= 2.
PoseGraph2 chain_with_loops(int n, int loops, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto g = testing::random_graph<Pose2>(rng, n, loops, 0.0);
  for (auto& f : g.factors) f.information = Eigen::Vector3d(100.0, 100.0, 400.0).asDiagonal();
  return g;
}

CorruptionSpec false_loops(double ratio, std::uint64_t seed = 1) {
  CorruptionSpec s;
  s.mode = CorruptionMode::FalseLoops;
  s.outlier_ratio = ratio;
  s.seed = seed;
  return s;
}

CorruptionSpec noisy(double ratio, std::uint64_t seed = 1) {
  CorruptionSpec s;
  s.mode = CorruptionMode::NoisyPerturbation;
  s.outlier_ratio = ratio;
  s.seed = seed;
  return s;
}

std::size_t count_labeled(const PoseGraph2& g) {
  std::size_t n = 0;
  for (const auto& f : g.factors) n += f.is_true_outlier.value_or(false) ? 1 : 0;
  return n;
}

TEST(FalseLoopCount, RatioArithmetic) {
  EXPECT_EQ(false_loop_count(0.1, 90), 10u);
  EXPECT_EQ(false_loop_count(0.5, 80), 80u);
  EXPECT_EQ(false_loop_count(0.0, 80), 0u);
  EXPECT_THROW(false_loop_count(1.0, 0), DomainError);
}

TEST(InjectFalseLoops, ZeroRatioLeavesGraph) {
  const auto g = chain_with_loops(120, 20, 1);
  const auto out = inject_false_loops(g, false_loops(0.0));
  ASSERT_EQ(out.factors.size(), g.factors.size());
  EXPECT_EQ(count_labeled(out), 0u);
}

TEST(InjectFalseLoops, NinetyLoopsAtTenPercent) {
  const auto g = chain_with_loops(200, 90, 2);
  ASSERT_EQ(g.loop_count(), 90u);
  const auto out = inject_false_loops(g, false_loops(0.1));
  EXPECT_EQ(out.factors.size(), g.factors.size() + 10);
  EXPECT_EQ(count_labeled(out), 10u);
}

TEST(InjectFalseLoops, InjectedExceedGateAndGap) {
  const auto g = chain_with_loops(200, 40, 3);
  const CorruptionSpec spec = false_loops(0.5, 9);
  const auto out = inject_false_loops(g, spec);
  const double gate = chi2_quantile(0.95, 3);
  for (std::size_t i = g.factors.size(); i < out.factors.size(); ++i) {
    const auto& f = out.factors[i];
    EXPECT_TRUE(f.is_true_outlier.value_or(false));
    EXPECT_EQ(f.kind, FactorKind::LoopClosure);
    EXPECT_GE(f.to_id - f.from_id, spec.min_id_gap);
    EXPECT_GT(factor_residual(f, out).squaredNorm(), gate);
  }
}

TEST(InjectFalseLoops, ExistingFactorsAndVerticesUntouched) {
  const auto g = chain_with_loops(150, 30, 4);
  const auto out = inject_false_loops(g, false_loops(0.3));
  for (const auto& [id, x] : g.vertices) EXPECT_EQ(out.pose(id), x);
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    EXPECT_EQ(out.factors[i].measurement, g.factors[i].measurement);
    EXPECT_EQ(out.factors[i].information, g.factors[i].information);
    EXPECT_EQ(out.factors[i].is_true_outlier, false);
  }
}

TEST(InjectFalseLoops, Deterministic) {
  const auto g = chain_with_loops(150, 30, 5);
  const auto a = inject_false_loops(g, false_loops(0.3, 7));
  const auto b = inject_false_loops(g, false_loops(0.3, 7));
  const auto c = inject_false_loops(g, false_loops(0.3, 8));
  ASSERT_EQ(a.factors.size(), b.factors.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.factors.size(); ++i) {
    EXPECT_EQ(a.factors[i].measurement, b.factors[i].measurement);
    EXPECT_EQ(a.factors[i].from_id, b.factors[i].from_id);
    differs |= !(a.factors[i].measurement == c.factors[i].measurement);
  }
  EXPECT_TRUE(differs);
}

TEST(InjectFalseLoops, TooSmallGraph) {
  const auto g = chain_with_loops(20, 3, 6);
  EXPECT_THROW(inject_false_loops(g, false_loops(0.3)), DomainError);
  EXPECT_THROW(inject_false_loops(g, noisy(0.3)), ContractError);
}

TEST(Perturb, ZeroNoiseZeroRatioUnchanged) {
  const auto g = chain_with_loops(50, 10, 7);
  CorruptionSpec spec = noisy(0.0);
  spec.odom_sigma = {0.0, 0.0, 0.0};
  const auto out = perturb(g, spec);
  for (std::size_t i = 0; i < g.factors.size(); ++i) EXPECT_EQ(out.factors[i].measurement, g.factors[i].measurement);
  EXPECT_EQ(count_labeled(out), 0u);
}

TEST(Perturb, ThirtyPercentOfHundredLoops) {
  const auto g = chain_with_loops(300, 100, 8);
  ASSERT_EQ(g.loop_count(), 100u);
  const auto out = perturb(g, noisy(0.3));
  EXPECT_EQ(count_labeled(out), 30u);
  for (const auto& f : out.factors) {
    if (f.is_true_outlier.value_or(false)) {
      EXPECT_EQ(f.kind, FactorKind::LoopClosure);
    }
  }
}

TEST(Perturb, OdometryNoiseAndCleanLoops) {
  const auto g = chain_with_loops(100, 20, 9);
  const auto out = perturb(g, noisy(0.25));
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    const auto& f = out.factors[i];
    if (f.kind == FactorKind::Odometry) {
      EXPECT_FALSE(f.measurement == g.factors[i].measurement);
    } else if (!f.is_true_outlier.value_or(false)) {
      EXPECT_EQ(f.measurement, g.factors[i].measurement);
    }
  }
  for (const auto& [id, x] : g.vertices) EXPECT_EQ(out.pose(id), x);
}

TEST(Perturb, SeededDeterminism) {
  const auto g = chain_with_loops(100, 40, 10);
  const auto a = perturb(g, noisy(0.3, 3));
  const auto b = perturb(g, noisy(0.3, 3));
  const auto c = perturb(g, noisy(0.3, 4));
  bool same_set = true;
  for (std::size_t i = 0; i < a.factors.size(); ++i) {
    EXPECT_EQ(a.factors[i].measurement, b.factors[i].measurement);
    EXPECT_EQ(a.factors[i].is_true_outlier, b.factors[i].is_true_outlier);
    same_set &= a.factors[i].is_true_outlier == c.factors[i].is_true_outlier;
  }
  EXPECT_FALSE(same_set);
}

TEST(Perturb, SigmaLengthChecked) {
  const auto g = chain_with_loops(30, 3, 11);
  CorruptionSpec spec = noisy(0.3);
  spec.loop_sigma = {1.0, 1.0};
  EXPECT_THROW(perturb(g, spec), DomainError);
}

TEST(CorruptionSpec, Validation) {
  CorruptionSpec s;
  s.outlier_ratio = 1.5;
  EXPECT_THROW(s.validate(), DomainError);
  s.outlier_ratio = 0.2;
  s.odom_sigma = {-1.0, 0.0, 0.0};
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(GridWorld, Shape) {
  const GridWorld w = make_grid_world({});
  EXPECT_EQ(w.ground_truth.vertices.size(), 300u);
  EXPECT_EQ(w.ground_truth.loop_count(), 80u);
  EXPECT_NO_THROW(w.measured.validate());
  for (const auto& f : w.ground_truth.factors) EXPECT_LE(factor_residual_norm(f, w.ground_truth), 1e-9);
}

}  // namespace
}  // namespace pgo
