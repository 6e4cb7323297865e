#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pgo/eval.hpp"
#include "test_util.hpp"

namespace pgo {
namespace {

std::map<VertexId, Pose2> line_trajectory(int n, double step = 1.0) {
  std::map<VertexId, Pose2> t;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Pose2 x{};
  for (int i = 0; i < n; ++i) {
    t.emplace(i, x);
    x = se_compose(x, Pose2(step, 0.0, u(rng)));
  }
  return t;
}

template <class P>
std::map<VertexId, P> transformed(const std::map<VertexId, P>& t, const P& g) {
  std::map<VertexId, P> out;
  for (const auto& [id, x] : t) out.emplace(id, se_compose(g, x));
  return out;
}

TEST(ScoreClassification, Perfect) {
  const std::vector<Classification> pred{Classification::Inlier, Classification::Outlier, Classification::Inlier};
  const std::vector<bool> labels{false, true, false};
  const std::vector<FactorKind> kinds(3, FactorKind::LoopClosure);
  const auto r = score_classification(pred, labels, kinds);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_TRUE(r.perfect());
}

TEST(ScoreClassification, AllInlierConvention) {
  const std::vector<Classification> pred(4, Classification::Inlier);
  const std::vector<bool> labels{true, false, false, true};
  const std::vector<FactorKind> kinds(4, FactorKind::LoopClosure);
  const auto r = score_classification(pred, labels, kinds);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.precision, 1.0);
}

TEST(ScoreClassification, OdometryIgnored) {
  const std::vector<Classification> pred{Classification::Outlier, Classification::Inlier};
  const std::vector<bool> labels{false, false};
  const std::vector<FactorKind> kinds{FactorKind::Odometry, FactorKind::LoopClosure};
  const auto r = score_classification(pred, labels, kinds);
  EXPECT_EQ(r.false_positives, 0u);
  EXPECT_EQ(r.true_negatives, 1u);
}

TEST(ScoreClassification, MatchesBruteForceTally) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<Classification> pred(n);
    std::vector<bool> labels(n), said(n), loop(n);
    std::vector<FactorKind> kinds(n);
    for (std::size_t i = 0; i < n; ++i) {
      said[i] = coin(rng);
      pred[i] = said[i] ? Classification::Outlier : Classification::Inlier;
      labels[i] = coin(rng);
      loop[i] = !coin(rng);
      kinds[i] = loop[i] ? FactorKind::LoopClosure : FactorKind::Odometry;
    }
    const auto r = score_classification(pred, labels, kinds);
    const auto t = oracle::confusion(said, labels, loop);
    EXPECT_EQ(r.true_positives, t.tp);
    EXPECT_EQ(r.false_positives, t.fp);
    EXPECT_EQ(r.true_negatives, t.tn);
    EXPECT_EQ(r.false_negatives, t.fn);
    if (t.tp + t.fp > 0) EXPECT_DOUBLE_EQ(r.precision, static_cast<double>(t.tp) / (t.tp + t.fp));
    if (t.tp + t.fn > 0) EXPECT_DOUBLE_EQ(r.recall, static_cast<double>(t.tp) / (t.tp + t.fn));
  }
}

TEST(ScoreClassification, LengthMismatch) {
  const std::vector<Classification> pred(2);
  const std::vector<bool> labels(3);
  const std::vector<FactorKind> kinds(2);
  EXPECT_THROW(score_classification(pred, labels, kinds), ContractError);
}

TEST(Ate, Identical) {
  const auto t = line_trajectory(50);
  EXPECT_NEAR(ate(t, t), 0.0, 1e-12);
}

TEST(Ate, RigidMotionRemoved) {
  const auto t = line_trajectory(50);
  EXPECT_LE(ate(transformed(t, Pose2(3.0, -2.0, 1.1)), t), 1e-9);
  std::mt19937_64 rng(2);
  std::map<VertexId, Pose3> t3;
  for (int i = 0; i < 30; ++i) t3.emplace(i, testing::random_pose3(rng));
  EXPECT_LE(ate(transformed(t3, testing::random_pose3(rng)), t3), 1e-9);
}

TEST(Ate, InvariantUnderCommonTransform) {
  const auto gt = line_trajectory(40);
  auto est = gt;
  std::mt19937_64 rng(3);
  for (auto& [id, x] : est) x = se_retract(x, testing::random_tangent<Pose2>(rng, 0.2));
  const Pose2 g(1.0, 2.0, -0.7);
  EXPECT_NEAR(ate(transformed(est, g), transformed(gt, g)), ate(est, gt), 1e-9);
}

// Independent alignment oracle for 2-D points: the optimal rotation angle of
// centred point sets is atan2(sum cross, sum dot).
double ate_oracle_2d(const std::map<VertexId, Pose2>& est, const std::map<VertexId, Pose2>& gt) {
  Eigen::Vector2d me = Eigen::Vector2d::Zero(), mg = Eigen::Vector2d::Zero();
  for (const auto& [id, x] : est) me += x.translation();
  for (const auto& [id, x] : gt) mg += x.translation();
  me /= static_cast<double>(est.size());
  mg /= static_cast<double>(gt.size());
  double sdot = 0.0, scross = 0.0;
  for (const auto& [id, x] : est) {
    const Eigen::Vector2d a = x.translation() - me;
    const Eigen::Vector2d b = gt.at(id).translation() - mg;
    sdot += a.dot(b);
    scross += a.x() * b.y() - a.y() * b.x();
  }
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(std::atan2(scross, sdot)).toRotationMatrix();
  double sq = 0.0;
  for (const auto& [id, x] : est) sq += (r * (x.translation() - me) - (gt.at(id).translation() - mg)).squaredNorm();
  return std::sqrt(sq / static_cast<double>(est.size()));
}

// One pose off by 1 m in 100: the raw RMSE is 0.1 m, and alignment can only
// shave a little off it.
TEST(Ate, SingleDisplacedPose) {
  const auto gt = line_trajectory(100);
  auto est = gt;
  est.at(50) = se_compose(Pose2(0.0, 1.0, 0.0), est.at(50));
  const double value = ate(est, gt);
  EXPECT_NEAR(value, ate_oracle_2d(est, gt), 1e-9);
  EXPECT_NEAR(value, 0.1, 1e-3);
  EXPECT_LE(value, 0.1);
}

TEST(Ate, DegenerateInput) {
  std::map<VertexId, Pose2> one{{0, Pose2{}}};
  EXPECT_THROW(ate(one, one), DomainError);
  auto a = line_trajectory(5);
  auto b = line_trajectory(6);
  EXPECT_THROW(ate(a, b), ContractError);
}

TEST(Rpe, Identical) {
  const auto t = line_trajectory(20);
  EXPECT_NEAR(rpe(t, t), 0.0, 1e-12);
}

TEST(Rpe, StretchedSteps) {
  const auto gt = line_trajectory(100);
  std::map<VertexId, Pose2> est;
  Pose2 x{};
  auto prev = gt.begin();
  est.emplace(prev->first, x);
  for (auto it = std::next(gt.begin()); it != gt.end(); prev = it++) {
    const Pose2 d = se_compose(se_inverse(prev->second), it->second);
    x = se_compose(x, Pose2(1.03 * d.x, 1.03 * d.y, d.theta));
    est.emplace(it->first, x);
  }
  EXPECT_NEAR(rpe(est, gt), 3.0, 0.1);
}

TEST(Rpe, SingleStep) {
  const std::map<VertexId, Pose2> gt{{0, Pose2{}}, {1, Pose2(1.0, 0.0, 0.0)}};
  const std::map<VertexId, Pose2> est{{0, Pose2{}}, {1, Pose2(1.05, 0.0, 0.0)}};
  EXPECT_NEAR(rpe(est, gt), 5.0, 1e-9);
}

TEST(Rpe, GaugeInvariant) {
  const auto gt = line_trajectory(30);
  auto est = gt;
  std::mt19937_64 rng(4);
  for (auto& [id, x] : est) x = se_retract(x, testing::random_tangent<Pose2>(rng, 0.1));
  EXPECT_NEAR(rpe(transformed(est, Pose2(5.0, 1.0, 2.0)), gt), rpe(est, gt), 1e-9);
}

TEST(Reports, JsonAndText) {
  ClassificationReport c;
  c.true_positives = 3;
  c.false_negatives = 1;
  c.precision = 1.0;
  c.recall = 0.75;
  const TrajectoryErrors t{0.5, 2.0};
  const auto j = to_json(c);
  EXPECT_EQ(j["recall"].get<double>(), 0.75);
  EXPECT_EQ(to_json(t)["ate_m"].get<double>(), 0.5);
  const std::string s = format_report(c, &t);
  EXPECT_NE(s.find("recall"), std::string::npos);
  EXPECT_NE(s.find("ATE [m]"), std::string::npos);
}

}  // namespace
}  // namespace pgo
