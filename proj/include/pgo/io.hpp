#pragma once

// Text formats:
//   g2o           VERTEX_SE2, EDGE_SE2, VERTEX_SE3:QUAT, EDGE_SE3:QUAT
//   label sidecar "<factor_index> <0|1> [odometry|loop]" per line
//   trajectory    CSV "id,x,y,theta" (SE2) or "id,x,y,z,qw,qx,qy,qz" (SE3)

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "pgo/errors.hpp"
#include "pgo/log.hpp"
#include "pgo/posegraph.hpp"

namespace pgo {

using AnyPoseGraph = std::variant<PoseGraph2, PoseGraph3>;

namespace detail {

class LineReader {
 public:
  LineReader(std::string_view line, std::size_t line_no) : line_(line), line_no_(line_no) {}

  std::string_view token() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < line_.size() && !is_ws(line_[pos_])) ++pos_;
    return line_.substr(start, pos_ - start);
  }

  double number() {
    const std::string_view t = token();
    if (t.empty()) throw ParseError(line_no_, "missing numeric field");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw ParseError(line_no_, "malformed numeric field '" + std::string(t) + "'");
    }
    return v;
  }

  VertexId id() {
    const std::string_view t = token();
    VertexId v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
      throw ParseError(line_no_, "malformed id field '" + std::string(t) + "'");
    }
    return v;
  }

 private:
  static bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r'; }
  void skip_ws() {
    while (pos_ < line_.size() && is_ws(line_[pos_])) ++pos_;
  }

  std::string_view line_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

template <class Matrix>
Matrix read_upper_triangle(LineReader& in) {
  Matrix m;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = r; c < m.cols(); ++c) {
      m(r, c) = in.number();
      m(c, r) = m(r, c);
    }
  }
  return m;
}

inline Pose3 read_pose3(LineReader& in) {
  Eigen::Vector3d t;
  t.x() = in.number();
  t.y() = in.number();
  t.z() = in.number();
  const double qx = in.number();
  const double qy = in.number();
  const double qz = in.number();
  const double qw = in.number();
  return {t, Eigen::Quaterniond(qw, qx, qy, qz)};
}

inline Pose2 read_pose2(LineReader& in) {
  const double x = in.number();
  const double y = in.number();
  const double th = in.number();
  return {x, y, th};
}

inline std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

inline void write_pose(std::ostream& os, const Pose2& p) {
  os << fmt17(p.x) << ' ' << fmt17(p.y) << ' ' << fmt17(p.theta);
}

inline void write_pose(std::ostream& os, const Pose3& p) {
  os << fmt17(p.t.x()) << ' ' << fmt17(p.t.y()) << ' ' << fmt17(p.t.z()) << ' ' << fmt17(p.q.x()) << ' '
     << fmt17(p.q.y()) << ' ' << fmt17(p.q.z()) << ' ' << fmt17(p.q.w());
}

}  // namespace detail

// Parses a g2o stream. SE(2) and SE(3) tags may not be mixed; an empty stream
// yields an empty SE(2) graph.
inline AnyPoseGraph parse_g2o(std::istream& in) {
  PoseGraph2 g2;
  PoseGraph3 g3;
  enum class Kind { Unknown, SE2, SE3 } kind = Kind::Unknown;
  struct PendingEdge {
    std::size_t line;
  };
  std::vector<PendingEdge> edge_lines2;
  std::vector<PendingEdge> edge_lines3;

  auto set_kind = [&](Kind k, std::size_t line_no) {
    if (kind != Kind::Unknown && kind != k) throw ParseError(line_no, "mixed SE2 and SE3 records");
    kind = k;
  };

  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> skipped;
  while (std::getline(in, line)) {
    ++line_no;
    detail::LineReader rd(line, line_no);
    const std::string_view tag = rd.token();
    if (tag.empty() || tag.front() == '#') continue;
    if (tag == "VERTEX_SE2") {
      set_kind(Kind::SE2, line_no);
      const VertexId id = rd.id();
      if (!g2.vertices.emplace(id, detail::read_pose2(rd)).second) throw ParseError(line_no, "duplicate vertex");
    } else if (tag == "VERTEX_SE3:QUAT") {
      set_kind(Kind::SE3, line_no);
      const VertexId id = rd.id();
      if (!g3.vertices.emplace(id, detail::read_pose3(rd)).second) throw ParseError(line_no, "duplicate vertex");
    } else if (tag == "EDGE_SE2") {
      set_kind(Kind::SE2, line_no);
      Factor<Pose2> f;
      f.from_id = rd.id();
      f.to_id = rd.id();
      f.measurement = detail::read_pose2(rd);
      f.information = detail::read_upper_triangle<Eigen::Matrix3d>(rd);
      f.kind = infer_kind(f.from_id, f.to_id);
      g2.factors.push_back(f);
      edge_lines2.push_back({line_no});
    } else if (tag == "EDGE_SE3:QUAT") {
      set_kind(Kind::SE3, line_no);
      Factor<Pose3> f;
      f.from_id = rd.id();
      f.to_id = rd.id();
      f.measurement = detail::read_pose3(rd);
      f.information = detail::read_upper_triangle<Matrix6d>(rd);
      f.kind = infer_kind(f.from_id, f.to_id);
      g3.factors.push_back(f);
      edge_lines3.push_back({line_no});
    } else {
      ++skipped[std::string(tag)];
    }
  }
  for (const auto& [tag, n] : skipped) logger().warn("parse_g2o: skipped {} line(s) with unknown tag {}", n, tag);

  auto check = [](const auto& g, const std::vector<PendingEdge>& lines) {
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
      const auto& f = g.factors[i];
      if (!g.vertices.contains(f.from_id) || !g.vertices.contains(f.to_id)) {
        throw IntegrityError("line " + std::to_string(lines[i].line) + ": edge references a missing vertex");
      }
      if (f.from_id == f.to_id) throw ParseError(lines[i].line, "edge connects a vertex to itself");
      Eigen::LLT<std::decay_t<decltype(f.information)>> llt(f.information);
      if (llt.info() != Eigen::Success) throw ParseError(lines[i].line, "information matrix is not positive definite");
    }
  };
  if (kind == Kind::SE3) {
    check(g3, edge_lines3);
    return g3;
  }
  check(g2, edge_lines2);
  return g2;
}

inline AnyPoseGraph parse_g2o(const std::string& text) {
  std::istringstream in(text);
  return parse_g2o(in);
}

template <class P>
PoseGraph<P> parse_g2o_as(std::istream& in) {
  AnyPoseGraph g = parse_g2o(in);
  if (auto* p = std::get_if<PoseGraph<P>>(&g)) return std::move(*p);
  if constexpr (std::is_same_v<P, Pose3>) {
    // An empty stream parses as SE(2); it is an equally valid empty SE(3) graph.
    if (std::get<PoseGraph2>(g).vertices.empty()) return {};
  }
  throw ParseError(0, "graph dimension does not match the requested pose type");
}

inline AnyPoseGraph load_g2o(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_g2o(in);
}

// Vertices in ascending id order, then factors in stored order.
template <class P>
void serialize_g2o(const PoseGraph<P>& g, std::ostream& os) {
  using Traits = PoseTraits<P>;
  for (const auto& [id, pose] : g.vertices) {
    os << Traits::kVertexTag << ' ' << id << ' ';
    detail::write_pose(os, pose);
    os << '\n';
  }
  for (const auto& f : g.factors) {
    os << Traits::kEdgeTag << ' ' << f.from_id << ' ' << f.to_id << ' ';
    detail::write_pose(os, f.measurement);
    for (int r = 0; r < Traits::kDim; ++r) {
      for (int c = r; c < Traits::kDim; ++c) os << ' ' << detail::fmt17(f.information(r, c));
    }
    os << '\n';
  }
}

template <class P>
std::string serialize_g2o(const PoseGraph<P>& g) {
  std::ostringstream os;
  serialize_g2o(g, os);
  return os.str();
}

inline void serialize_g2o(const AnyPoseGraph& g, std::ostream& os) {
  std::visit([&](const auto& graph) { serialize_g2o(graph, os); }, g);
}

// ---------------------------------------------------------------------------
// Label sidecar

struct FactorLabel {
  bool outlier = false;
  std::optional<FactorKind> kind;  // overrides id-adjacency inference
};

inline std::vector<FactorLabel> parse_labels(std::istream& in, std::size_t factor_count) {
  std::vector<FactorLabel> labels(factor_count);
  std::vector<bool> seen(factor_count, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::LineReader rd(line, line_no);
    const std::string_view first = rd.token();
    if (first.empty() || first.front() == '#') continue;
    std::size_t index = 0;
    if (auto [p, ec] = std::from_chars(first.data(), first.data() + first.size(), index);
        ec != std::errc() || p != first.data() + first.size()) {
      throw ParseError(line_no, "malformed factor index");
    }
    if (index >= factor_count) throw ParseError(line_no, "factor index out of range");
    const std::string_view flag = rd.token();
    if (flag != "0" && flag != "1") throw ParseError(line_no, "label must be 0 or 1");
    labels[index].outlier = flag == "1";
    if (const std::string_view kind = rd.token(); !kind.empty()) {
      if (kind == "odometry") {
        labels[index].kind = FactorKind::Odometry;
      } else if (kind == "loop") {
        labels[index].kind = FactorKind::LoopClosure;
      } else {
        throw ParseError(line_no, "unknown factor kind '" + std::string(kind) + "'");
      }
    }
    seen[index] = true;
  }
  for (std::size_t i = 0; i < factor_count; ++i) {
    if (!seen[i]) throw ParseError(line_no, "no label for factor " + std::to_string(i));
  }
  return labels;
}

template <class P>
void write_labels(const PoseGraph<P>& g, std::ostream& os) {
  for (std::size_t i = 0; i < g.factors.size(); ++i) {
    os << i << ' ' << (g.factors[i].is_true_outlier.value_or(false) ? 1 : 0) << '\n';
  }
}

// Applies sidecar labels (and kind overrides) to the graph's factors.
template <class P>
void apply_labels(PoseGraph<P>& g, const std::vector<FactorLabel>& labels) {
  if (labels.size() != g.factors.size()) throw ContractError("label count does not match factor count");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    g.factors[i].is_true_outlier = labels[i].outlier;
    if (labels[i].kind) g.factors[i].kind = *labels[i].kind;
  }
}

// ---------------------------------------------------------------------------
// Trajectory CSV

template <class P>
void write_trajectory_csv(const PoseGraph<P>& g, std::ostream& os) {
  using detail::fmt17;
  if constexpr (std::is_same_v<P, Pose2>) {
    os << "id,x,y,theta\n";
    for (const auto& [id, p] : g.vertices) os << id << ',' << fmt17(p.x) << ',' << fmt17(p.y) << ',' << fmt17(p.theta) << '\n';
  } else {
    os << "id,x,y,z,qw,qx,qy,qz\n";
    for (const auto& [id, p] : g.vertices) {
      os << id << ',' << fmt17(p.t.x()) << ',' << fmt17(p.t.y()) << ',' << fmt17(p.t.z()) << ',' << fmt17(p.q.w())
         << ',' << fmt17(p.q.x()) << ',' << fmt17(p.q.y()) << ',' << fmt17(p.q.z()) << '\n';
    }
  }
}

template <class P>
std::map<VertexId, P> read_trajectory_csv(std::istream& in) {
  std::map<VertexId, P> out;
  std::string line;
  std::size_t line_no = 0;
  constexpr std::size_t kFields = std::is_same_v<P, Pose2> ? 4 : 8;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    for (char& c : line) c = c == ',' ? ' ' : c;
    detail::LineReader rd(line, line_no);
    const VertexId id = rd.id();
    std::vector<double> v;
    for (std::size_t i = 1; i < kFields; ++i) v.push_back(rd.number());
    if constexpr (std::is_same_v<P, Pose2>) {
      out.emplace(id, Pose2(v[0], v[1], v[2]));
    } else {
      out.emplace(id, Pose3({v[0], v[1], v[2]}, Eigen::Quaterniond(v[3], v[4], v[5], v[6])));
    }
  }
  return out;
}

}  // namespace pgo
