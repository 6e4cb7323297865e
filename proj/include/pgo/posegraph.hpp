#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pgo/errors.hpp"
#include "pgo/lie.hpp"

namespace pgo {

using VertexId = std::int64_t;

enum class FactorKind { Odometry, LoopClosure };

inline const char* to_string(FactorKind k) { return k == FactorKind::Odometry ? "odometry" : "loop"; }

template <class P>
struct Factor {
  using Matrix = typename PoseTraits<P>::Matrix;

  FactorKind kind = FactorKind::Odometry;
  VertexId from_id = 0;
  VertexId to_id = 0;
  P measurement{};
  Matrix information = Matrix::Identity();
  std::optional<bool> is_true_outlier;

  // Upper-triangular W = L^T with information = L L^T, so that
  // ||W e||^2 = e^T information e.
  Matrix whitener() const {
    Eigen::LLT<Matrix> llt(information);
    if (llt.info() != Eigen::Success) throw IntegrityError("information matrix is not positive definite");
    return llt.matrixL().transpose();
  }
};

// Kind inferred from id adjacency: consecutive ids are odometry.
inline FactorKind infer_kind(VertexId from, VertexId to) {
  return (from - to == 1 || to - from == 1) ? FactorKind::Odometry : FactorKind::LoopClosure;
}

template <class P>
struct PoseGraph {
  using Pose = P;

  std::map<VertexId, P> vertices;
  std::vector<Factor<P>> factors;
  std::optional<VertexId> anchor;  // defaults to the smallest vertex id

  VertexId anchor_id() const {
    if (anchor) return *anchor;
    if (vertices.empty()) throw IntegrityError("graph has no vertices");
    return vertices.begin()->first;
  }

  const P& pose(VertexId id) const {
    auto it = vertices.find(id);
    if (it == vertices.end()) throw IntegrityError("missing vertex " + std::to_string(id));
    return it->second;
  }

  std::size_t loop_count() const {
    std::size_t n = 0;
    for (const auto& f : factors) n += f.kind == FactorKind::LoopClosure ? 1 : 0;
    return n;
  }

  // Checks every factor's endpoints and information matrix.
  void validate_factors() const {
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const auto& f = factors[i];
      const std::string tag = "factor " + std::to_string(i) + ": ";
      if (f.from_id == f.to_id) throw IntegrityError(tag + "self-loop on vertex " + std::to_string(f.from_id));
      if (!vertices.contains(f.from_id) || !vertices.contains(f.to_id)) {
        throw IntegrityError(tag + "references a missing vertex");
      }
      if ((f.information - f.information.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw IntegrityError(tag + "information matrix is not symmetric");
      }
      Eigen::LLT<typename Factor<P>::Matrix> llt(f.information);
      if (llt.info() != Eigen::Success) throw IntegrityError(tag + "information matrix is not positive definite");
    }
    if (anchor && !vertices.contains(*anchor)) throw IntegrityError("anchor vertex does not exist");
  }

  // True when the odometry factors connect every vertex.
  bool odometry_connected() const {
    if (vertices.size() <= 1) return true;
    std::map<VertexId, std::size_t> index;
    for (const auto& [id, p] : vertices) index.emplace(id, index.size());
    std::vector<std::size_t> parent(index.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    std::size_t components = index.size();
    for (const auto& f : factors) {
      if (f.kind != FactorKind::Odometry) continue;
      auto ia = index.find(f.from_id);
      auto ib = index.find(f.to_id);
      if (ia == index.end() || ib == index.end()) continue;
      const std::size_t a = find(ia->second);
      const std::size_t b = find(ib->second);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    return components == 1;
  }

  void validate() const {
    validate_factors();
    if (!odometry_connected()) throw IntegrityError("odometry factors do not connect all vertices");
  }
};

using PoseGraph2 = PoseGraph<Pose2>;
using PoseGraph3 = PoseGraph<Pose3>;

// Unwhitened error log(Z^-1 Xi^-1 Xj).
template <class P>
typename PoseTraits<P>::Tangent relative_error(const P& measurement, const P& from, const P& to) {
  return se_log(se_compose(se_inverse(measurement), se_compose(se_inverse(from), to)));
}

template <class P>
typename PoseTraits<P>::Tangent factor_residual(const Factor<P>& f, const PoseGraph<P>& g) {
  return f.whitener() * relative_error(f.measurement, g.pose(f.from_id), g.pose(f.to_id));
}

template <class P>
double factor_residual_norm(const Factor<P>& f, const PoseGraph<P>& g) {
  return factor_residual(f, g).norm();
}

// Whitened residual and its Jacobians with respect to right perturbations
// X <- X exp(d) of the two endpoint poses.
template <class P>
struct FactorLinearization {
  typename PoseTraits<P>::Tangent residual;
  typename PoseTraits<P>::Matrix d_from;
  typename PoseTraits<P>::Matrix d_to;
};

template <class P>
FactorLinearization<P> linearize_factor(const P& measurement, const typename PoseTraits<P>::Matrix& whitener,
                                        const P& from, const P& to) {
  using Matrix = typename PoseTraits<P>::Matrix;
  const P from_inv_to = se_compose(se_inverse(from), to);
  const auto e = se_log(se_compose(se_inverse(measurement), from_inv_to));
  const Matrix jr_inv = se_right_jacobian(e).inverse();
  FactorLinearization<P> out;
  out.residual = whitener * e;
  out.d_to = whitener * jr_inv;
  out.d_from = -out.d_to * se_adjoint(se_inverse(from_inv_to));
  return out;
}

// Dead-reckons vertex estimates by chaining odometry measurements from the
// anchor. Vertices not reached keep their current value.
template <class P>
PoseGraph<P> initialize_from_odometry(PoseGraph<P> g) {
  if (g.vertices.empty()) return g;
  std::map<VertexId, const Factor<P>*> forward;
  for (const auto& f : g.factors) {
    if (f.kind == FactorKind::Odometry && f.to_id == f.from_id + 1) forward.emplace(f.from_id, &f);
  }
  VertexId id = g.anchor_id();
  P current = g.vertices.at(id);
  for (auto it = forward.find(id); it != forward.end(); it = forward.find(id)) {
    current = se_compose(current, it->second->measurement);
    id = it->second->to_id;
    auto v = g.vertices.find(id);
    if (v == g.vertices.end()) break;
    v->second = current;
  }
  return g;
}

}  // namespace pgo
