#pragma once

// Seeded dataset corruption.
//
//   FalseLoops         appends loop closures between far-apart vertices whose
//                      measurements are guaranteed to fail the chi2(0.95) gate
//                      on the graph's current (ground-truth) vertices.
//   NoisyPerturbation  right-composes Gaussian tangent noise onto every
//                      odometry measurement and onto a random subset of loops.
//
// Both label every factor's is_true_outlier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "pgo/errors.hpp"
#include "pgo/posegraph.hpp"
#include "pgo/schedule.hpp"
#include "pgo/solver.hpp"

namespace pgo {

enum class CorruptionMode { FalseLoops, NoisyPerturbation };

inline const char* to_string(CorruptionMode m) {
  return m == CorruptionMode::FalseLoops ? "false_loops" : "noisy_perturbation";
}

struct CorruptionSpec {
  std::uint64_t seed = 0;
  CorruptionMode mode = CorruptionMode::FalseLoops;
  double outlier_ratio = 0.0;
  // Per-DOF standard deviations in tangent order. Empty selects the defaults
  // for the graph's dimension.
  std::vector<double> odom_sigma;
  std::vector<double> loop_sigma;
  int min_id_gap = 50;

  void validate() const {
    if (!(outlier_ratio >= 0.0 && outlier_ratio <= 1.0)) throw DomainError("outlier_ratio must lie in [0, 1]");
    for (double s : odom_sigma) {
      if (!(s >= 0.0)) throw DomainError("odom_sigma entries must be >= 0");
    }
    for (double s : loop_sigma) {
      if (!(s >= 0.0)) throw DomainError("loop_sigma entries must be >= 0");
    }
    if (min_id_gap < 1) throw DomainError("min_id_gap must be >= 1");
  }
};

template <class P>
typename PoseTraits<P>::Tangent default_odom_sigma() {
  if constexpr (std::is_same_v<P, Pose2>) {
    return {0.05, 0.05, 0.01};
  } else {
    typename PoseTraits<P>::Tangent s;
    s << 0.05, 0.05, 0.05, 0.01, 0.01, 0.01;
    return s;
  }
}

template <class P>
typename PoseTraits<P>::Tangent default_loop_sigma() {
  if constexpr (std::is_same_v<P, Pose2>) {
    return {1.0, 1.0, 0.5};
  } else {
    typename PoseTraits<P>::Tangent s;
    s << 1.0, 1.0, 1.0, 0.5, 0.5, 0.5;
    return s;
  }
}

namespace detail {

template <class P>
typename PoseTraits<P>::Tangent sigma_vector(const std::vector<double>& given,
                                             const typename PoseTraits<P>::Tangent& fallback, const char* name) {
  if (given.empty()) return fallback;
  if (given.size() != static_cast<std::size_t>(PoseTraits<P>::kDim)) {
    throw DomainError(std::string(name) + " needs " + std::to_string(PoseTraits<P>::kDim) + " entries");
  }
  typename PoseTraits<P>::Tangent s;
  for (int k = 0; k < PoseTraits<P>::kDim; ++k) s(k) = given[static_cast<std::size_t>(k)];
  return s;
}

template <class P>
typename PoseTraits<P>::Tangent gaussian_tangent(std::mt19937_64& rng, const typename PoseTraits<P>::Tangent& sigma) {
  std::normal_distribution<double> n01(0.0, 1.0);
  typename PoseTraits<P>::Tangent v;
  for (int k = 0; k < PoseTraits<P>::kDim; ++k) v(k) = sigma(k) * n01(rng);
  return v;
}

// Translation uniform in a ball of the given radius, rotation uniform on the group.
template <class P>
P random_relative_pose(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  if constexpr (std::is_same_v<P, Pose2>) {
    const double r = radius * std::sqrt(u01(rng));
    const double a = 2.0 * std::numbers::pi * u01(rng);
    const double th = std::numbers::pi * (2.0 * u01(rng) - 1.0);
    return {r * std::cos(a), r * std::sin(a), th};
  } else {
    Eigen::Vector3d dir(n01(rng), n01(rng), n01(rng));
    dir.normalize();
    const double r = radius * std::cbrt(u01(rng));
    Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
    return {r * dir, q};
  }
}

template <class P>
std::vector<Factor<P>> labeled_copy(const std::vector<Factor<P>>& factors) {
  std::vector<Factor<P>> out = factors;
  for (auto& f : out) f.is_true_outlier = false;
  return out;
}

}  // namespace detail

// Number of loops to inject so that injected / (injected + existing) matches
// ratio as closely as an integer count allows.
inline std::size_t false_loop_count(double ratio, std::size_t existing_loops) {
  if (ratio <= 0.0) return 0;
  if (ratio >= 1.0) {
    throw DomainError("outlier_ratio = 1 is unsatisfiable with " + std::to_string(existing_loops) + " existing loops");
  }
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(existing_loops) / (1.0 - ratio)));
}

template <class P>
PoseGraph<P> inject_false_loops(const PoseGraph<P>& g, const CorruptionSpec& spec) {
  spec.validate();
  if (spec.mode != CorruptionMode::FalseLoops) throw ContractError("inject_false_loops requires mode false_loops");
  PoseGraph<P> out = g;
  out.factors = detail::labeled_copy(g.factors);
  const std::size_t existing = g.loop_count();
  const std::size_t k = false_loop_count(spec.outlier_ratio, existing);
  if (k == 0) return out;
  if (g.vertices.size() < static_cast<std::size_t>(spec.min_id_gap) + 1) {
    throw DomainError("inject_false_loops: graph needs at least min_id_gap + 1 vertices");
  }

  // Injected factors reuse an existing loop's information (or odometry's).
  const Factor<P>* proto = nullptr;
  double step_sum = 0.0;
  std::size_t odom = 0;
  for (const auto& f : g.factors) {
    if (f.kind == FactorKind::LoopClosure && proto == nullptr) proto = &f;
    if (f.kind == FactorKind::Odometry) {
      step_sum += f.measurement.translation().norm();
      ++odom;
    }
  }
  if (proto == nullptr) {
    if (g.factors.empty()) throw DomainError("inject_false_loops: graph has no factors to copy information from");
    proto = &g.factors.front();
  }
  const double mean_step = odom > 0 && step_sum > 0.0 ? step_sum / static_cast<double>(odom) : 1.0;
  const double radius = 5.0 * mean_step;
  const typename PoseTraits<P>::Matrix info = proto->information;
  const typename PoseTraits<P>::Matrix whitener = proto->whitener();
  const double gate = chi2_quantile(kClassificationP, PoseTraits<P>::kDim);

  std::vector<VertexId> ids;
  ids.reserve(g.vertices.size());
  for (const auto& [id, pose] : g.vertices) ids.push_back(id);
  if (ids.back() - ids.front() < spec.min_id_gap) {
    throw DomainError("inject_false_loops: no vertex pair is min_id_gap apart");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  constexpr int kMaxAttempts = 100000;
  for (std::size_t n = 0; n < k; ++n) {
    int attempts = 0;
    while (true) {
      if (++attempts > kMaxAttempts) throw DomainError("inject_false_loops: rejection sampling exhausted");
      VertexId a = ids[pick(rng)];
      VertexId b = ids[pick(rng)];
      if (a > b) std::swap(a, b);
      if (b - a < spec.min_id_gap) continue;
      const P z = detail::random_relative_pose<P>(rng, radius);
      const typename PoseTraits<P>::Tangent r = whitener * relative_error(z, g.vertices.at(a), g.vertices.at(b));
      if (r.squaredNorm() <= gate) continue;
      Factor<P> f;
      f.kind = FactorKind::LoopClosure;
      f.from_id = a;
      f.to_id = b;
      f.measurement = z;
      f.information = info;
      f.is_true_outlier = true;
      out.factors.push_back(f);
      break;
    }
  }
  return out;
}

template <class P>
PoseGraph<P> perturb(const PoseGraph<P>& g, const CorruptionSpec& spec) {
  spec.validate();
  if (spec.mode != CorruptionMode::NoisyPerturbation) throw ContractError("perturb requires mode noisy_perturbation");
  const auto odom_sigma = detail::sigma_vector<P>(spec.odom_sigma, default_odom_sigma<P>(), "odom_sigma");
  const auto loop_sigma = detail::sigma_vector<P>(spec.loop_sigma, default_loop_sigma<P>(), "loop_sigma");

  PoseGraph<P> out = g;
  out.factors = detail::labeled_copy(g.factors);
  std::mt19937_64 rng(spec.seed);

  if (!odom_sigma.isZero()) {
    for (auto& f : out.factors) {
      if (f.kind != FactorKind::Odometry) continue;
      f.measurement = se_compose(f.measurement, se_exp(detail::gaussian_tangent<P>(rng, odom_sigma)));
    }
  }

  std::vector<std::size_t> loops;
  for (std::size_t i = 0; i < out.factors.size(); ++i) {
    if (out.factors[i].kind == FactorKind::LoopClosure) loops.push_back(i);
  }
  const auto m = static_cast<std::size_t>(std::llround(spec.outlier_ratio * static_cast<double>(loops.size())));
  std::shuffle(loops.begin(), loops.end(), rng);
  loops.resize(m);
  std::sort(loops.begin(), loops.end());
  for (std::size_t i : loops) {
    auto& f = out.factors[i];
    if (!loop_sigma.isZero()) f.measurement = se_compose(f.measurement, se_exp(detail::gaussian_tangent<P>(rng, loop_sigma)));
    f.is_true_outlier = true;
  }
  return out;
}

}  // namespace pgo
