#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "pgo/io.hpp"
#include "pgo/posegraph.hpp"
#include "test_util.hpp"

namespace pgo {
namespace {

PoseGraph2 two_vertex_graph(const Eigen::Matrix3d& info) {
  PoseGraph2 g;
  g.vertices.emplace(0, Pose2{});
  g.vertices.emplace(1, Pose2(2, 0, 0));
  Factor<Pose2> f;
  f.from_id = 0;
  f.to_id = 1;
  f.measurement = Pose2(1, 0, 0);
  f.information = info;
  g.factors.push_back(f);
  return g;
}

TEST(FactorResidual, ConsistentMeasurementIsZero) {
  std::mt19937_64 rng(1);
  PoseGraph2 g = two_vertex_graph(Eigen::Matrix3d::Identity());
  g.vertices[1] = testing::random_pose2(rng);
  g.factors[0].measurement = se_compose(se_inverse(g.pose(0)), g.pose(1));
  EXPECT_LE(factor_residual(g.factors[0], g).norm(), 1e-12);
}

TEST(FactorResidual, UnitTranslation) {
  const PoseGraph2 g = two_vertex_graph(Eigen::Matrix3d::Identity());
  EXPECT_NEAR(factor_residual_norm(g.factors[0], g), 1.0, 1e-12);
}

TEST(FactorResidual, WhiteningScalesNorm) {
  const PoseGraph2 g = two_vertex_graph(4.0 * Eigen::Matrix3d::Identity());
  EXPECT_NEAR(factor_residual_norm(g.factors[0], g), 2.0, 1e-12);
}

TEST(FactorResidual, MissingVertex) {
  PoseGraph2 g = two_vertex_graph(Eigen::Matrix3d::Identity());
  g.factors[0].to_id = 9;
  EXPECT_THROW(factor_residual(g.factors[0], g), IntegrityError);
  EXPECT_THROW(g.validate(), IntegrityError);
}

TEST(FactorResidual, WhitenedNormIsMahalanobis) {
  std::mt19937_64 rng(2);
  auto g = testing::random_graph<Pose3>(rng, 10, 5, 0.3);
  for (const auto& f : g.factors) {
    const auto e = relative_error(f.measurement, g.pose(f.from_id), g.pose(f.to_id));
    EXPECT_NEAR(factor_residual(f, g).squaredNorm(), e.dot(f.information * e), 1e-9 * (1.0 + e.squaredNorm()));
  }
}

template <class P>
class GraphTest : public ::testing::Test {};
using PoseTypes = ::testing::Types<Pose2, Pose3>;
TYPED_TEST_SUITE(GraphTest, PoseTypes);

TYPED_TEST(GraphTest, GaugeInvariance) {
  using P = TypeParam;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testing::random_graph<P>(rng, 20, 10, 0.5);
    auto moved = g;
    const P t = testing::random_pose<P>(rng);
    for (auto& [id, x] : moved.vertices) x = se_compose(t, x);
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
      EXPECT_NEAR(factor_residual_norm(g.factors[i], g), factor_residual_norm(moved.factors[i], moved), 1e-9);
    }
  }
}

TYPED_TEST(GraphTest, SerializeRoundTrip) {
  using P = TypeParam;
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_graph<P>(rng, 15, 6, 0.5);
    std::istringstream in(serialize_g2o(g));
    const auto back = parse_g2o_as<P>(in);
    ASSERT_EQ(back.vertices.size(), g.vertices.size());
    ASSERT_EQ(back.factors.size(), g.factors.size());
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    for (const auto& [id, x] : g.vertices) {
      const auto lx = se_log(x);
      const auto ly = se_log(back.pose(id));
      for (int k = 0; k < lx.size(); ++k) EXPECT_PRED2(close, ly(k), lx(k));
    }
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
      const auto& a = g.factors[i];
      const auto& b = back.factors[i];
      EXPECT_EQ(a.from_id, b.from_id);
      EXPECT_EQ(a.to_id, b.to_id);
      EXPECT_EQ(a.kind, b.kind);
      const auto la = se_log(a.measurement);
      const auto lb = se_log(b.measurement);
      for (int k = 0; k < la.size(); ++k) EXPECT_PRED2(close, lb(k), la(k));
      for (int r = 0; r < a.information.rows(); ++r)
        for (int c = 0; c < a.information.cols(); ++c) EXPECT_PRED2(close, b.information(r, c), a.information(r, c));
    }
  }
}

TEST(ParseG2o, MinimalFile) {
  const auto any = parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1"));
  const auto& g = std::get<PoseGraph2>(any);
  EXPECT_EQ(g.vertices.size(), 2u);
  ASSERT_EQ(g.factors.size(), 1u);
  EXPECT_EQ(g.factors[0].kind, FactorKind::Odometry);
  EXPECT_EQ(g.factors[0].information, Eigen::Matrix3d::Identity());
}

TEST(ParseG2o, EmptyStream) {
  const auto any = parse_g2o(std::string());
  EXPECT_TRUE(std::get<PoseGraph2>(any).vertices.empty());
}

TEST(ParseG2o, UpperTriangleExpansion) {
  const auto any = parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 5 1 0 0\nEDGE_SE2 0 5 1 0 0 2 0.5 0.1 3 0.2 4\n"));
  const auto& f = std::get<PoseGraph2>(any).factors[0];
  EXPECT_EQ(f.kind, FactorKind::LoopClosure);
  EXPECT_EQ(f.information(0, 1), 0.5);
  EXPECT_EQ(f.information(1, 0), 0.5);
  EXPECT_EQ(f.information(2, 0), 0.1);
  EXPECT_EQ(f.information(2, 1), 0.2);
}

TEST(ParseG2o, MalformedNumberReportsLine) {
  try {
    parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 zz 0\n"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ParseG2o, MissingVertexIsIntegrityError) {
  EXPECT_THROW(parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n")), IntegrityError);
}

TEST(ParseG2o, UnknownTagsSkipped) {
  const auto any = parse_g2o(std::string("FIX 0\nVERTEX_SE2 0 0 0 0\nVERTEX_XY 3 1 1\n"));
  EXPECT_EQ(std::get<PoseGraph2>(any).vertices.size(), 1u);
}

TEST(ParseG2o, MixedDimensionsRejected) {
  EXPECT_THROW(parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nVERTEX_SE3:QUAT 1 0 0 0 0 0 0 1\n")), ParseError);
}

TEST(ParseG2o, NonPositiveDefiniteRejected) {
  EXPECT_THROW(parse_g2o(std::string("VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 -1 0 1\n")),
               ParseError);
}

TEST(SerializeG2o, SingleVertex) {
  PoseGraph2 g;
  g.vertices.emplace(3, Pose2(1, 2, 0.5));
  const std::string s = serialize_g2o(g);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1);
  EXPECT_EQ(s.rfind("VERTEX_SE2 3 ", 0), 0u);
}

TEST(SerializeG2o, Se3EdgeHas21InformationEntries) {
  PoseGraph3 g;
  g.vertices.emplace(0, Pose3{});
  g.vertices.emplace(7, Pose3{});
  Factor<Pose3> f;
  f.from_id = 0;
  f.to_id = 7;
  f.kind = FactorKind::LoopClosure;
  g.factors.push_back(f);
  const std::string s = serialize_g2o(g);
  const auto pos = s.find("EDGE_SE3:QUAT");
  ASSERT_NE(pos, std::string::npos);
  std::istringstream line(s.substr(pos));
  std::string tok;
  int count = 0;
  while (line >> tok) ++count;
  // tag, two ids, 7 pose numbers, 21 information entries
  EXPECT_EQ(count, 1 + 2 + 7 + 21);
}

TEST(Labels, ParseApplyWrite) {
  PoseGraph2 g = two_vertex_graph(Eigen::Matrix3d::Identity());
  std::istringstream in("# index label\n0 1 loop\n");
  const auto labels = parse_labels(in, 1);
  apply_labels(g, labels);
  EXPECT_EQ(g.factors[0].is_true_outlier, true);
  EXPECT_EQ(g.factors[0].kind, FactorKind::LoopClosure);
  std::ostringstream out;
  write_labels(g, out);
  EXPECT_EQ(out.str(), "0 1\n");
}

TEST(Labels, Errors) {
  std::istringstream missing("0 1\n");
  EXPECT_THROW(parse_labels(missing, 2), ParseError);
  std::istringstream bad("0 2\n");
  EXPECT_THROW(parse_labels(bad, 1), ParseError);
  std::istringstream range("4 0\n");
  EXPECT_THROW(parse_labels(range, 1), ParseError);
}

TEST(TrajectoryCsv, RoundTrip) {
  std::mt19937_64 rng(5);
  const auto g = testing::random_graph<Pose3>(rng, 8, 0);
  std::stringstream io;
  write_trajectory_csv(g, io);
  EXPECT_EQ(io.str().rfind("id,x,y,z,qw,qx,qy,qz\n", 0), 0u);
  const auto back = read_trajectory_csv<Pose3>(io);
  ASSERT_EQ(back.size(), g.vertices.size());
  for (const auto& [id, x] : g.vertices) EXPECT_LE((se_log(se_compose(se_inverse(x), back.at(id)))).norm(), 1e-12);
}

TEST(PoseGraph, OdometryConnectivity) {
  std::mt19937_64 rng(6);
  auto g = testing::random_graph<Pose2>(rng, 6, 2);
  EXPECT_NO_THROW(g.validate());
  g.factors.erase(g.factors.begin() + 2);
  EXPECT_FALSE(g.odometry_connected());
}

TEST(PoseGraph, InitializeFromOdometry) {
  std::mt19937_64 rng(7);
  auto g = testing::random_graph<Pose2>(rng, 10, 3, 0.0);
  auto blank = g;
  for (auto& [id, x] : blank.vertices) x = Pose2{};
  blank.vertices[0] = g.vertices[0];
  const auto init = initialize_from_odometry(blank);
  for (const auto& [id, x] : g.vertices) EXPECT_LE(se_log(se_compose(se_inverse(x), init.pose(id))).norm(), 1e-9);
}

}  // namespace
}  // namespace pgo
