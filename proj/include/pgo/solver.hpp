#pragma once

// Robust nonlinear least squares with graduated non-convexity.
//
// The inner solver is Levenberg-Marquardt with full IRLS: every factor's
// whitened residual block is scaled by the SIG kernel weight rho'(r)/r at each
// relinearization, and steps are accepted only if the true robust cost
// sum_i rho(||r_i||; mu_i) does not increase.
//
// The outer loop assigns mu per factor, either by the efficient schedule
// (0 -> mu* -> 1 with the strong-outlier gate) or by the heuristic baseline
// ramp shared by all factors.
//
// Problems plug in through a small duck-typed interface:
//
//   static constexpr int kResidualDim, kBlockDim;
//   using State = ...;
//   std::size_t factor_count() const;
//   std::size_t block_count() const;                // free variable blocks
//   bool robust(std::size_t i) const;
//   Residual residual(const State&, std::size_t i) const;
//   void linearize(const State&, std::size_t i, Linearization&) const;
//   State retract(const State&, const Eigen::VectorXd& delta) const;

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "pgo/errors.hpp"
#include "pgo/kernel.hpp"
#include "pgo/log.hpp"
#include "pgo/posegraph.hpp"
#include "pgo/schedule.hpp"

namespace pgo {

enum class ScheduleKind { Efficient, Baseline };

inline const char* to_string(ScheduleKind k) { return k == ScheduleKind::Efficient ? "efficient" : "baseline"; }

// Gate level for flagging strong outliers inside the schedule.
inline constexpr double kStrongOutlierP = 0.9;
// Gate level for the final inlier/outlier classification.
inline constexpr double kClassificationP = 0.95;

struct SolverConfig {
  int max_inner_iters = 50;
  double rel_cost_tol = 1e-6;
  double abs_grad_tol = 1e-8;
  double lm_lambda_init = 1e-4;
  double lm_lambda_factor = 10.0;
  ScheduleKind schedule_kind = ScheduleKind::Efficient;
  bool robust_on_odometry = false;

  void validate() const {
    if (max_inner_iters < 1) throw DomainError("solver.max_inner_iters must be >= 1");
    if (!(rel_cost_tol > 0.0)) throw DomainError("solver.rel_cost_tol must be positive");
    if (!(abs_grad_tol > 0.0)) throw DomainError("solver.abs_grad_tol must be positive");
    if (!(lm_lambda_init > 0.0)) throw DomainError("solver.lm_lambda_init must be positive");
    if (!(lm_lambda_factor > 1.0)) throw DomainError("solver.lm_lambda_factor must be > 1");
  }
};

enum class Classification { Inlier, Outlier };

inline const char* to_string(Classification c) { return c == Classification::Inlier ? "inlier" : "outlier"; }

struct MuRecord {
  int outer_iteration = 0;
  double mu = 0.0;
};

// Free-block Jacobians of one factor. Block index -1 marks a held-constant
// variable (e.g. the gauge anchor).
template <int kResidualDim, int kBlockDim>
struct Linearization {
  Eigen::Matrix<double, kResidualDim, 1> residual;
  std::array<int, 2> blocks{-1, -1};
  std::array<Eigen::Matrix<double, kResidualDim, kBlockDim>, 2> jacobians;
};

struct InnerStats {
  int iterations = 0;         // linearizations
  int accepted_steps = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> cost_trace;  // cost after each accepted step, starting with the initial cost
};

template <class State>
struct InnerResult {
  State state;
  std::vector<double> residuals;  // whitened norms per factor
  InnerStats stats;
};

namespace detail {

inline constexpr double kMaxLambda = 1e16;

template <class Problem>
double factor_cost(const Problem& problem, std::size_t i, double r, double mu, const KernelConfig& kcfg) {
  return problem.robust(i) ? rho_unchecked(r, mu, kcfg.c) : 0.5 * r * r;
}

template <class Problem>
double total_cost(const Problem& problem, const typename Problem::State& state, std::span<const double> mus,
                  const KernelConfig& kcfg) {
  double cost = 0.0;
  for (std::size_t i = 0; i < problem.factor_count(); ++i) {
    cost += factor_cost(problem, i, problem.residual(state, i).norm(), mus[i], kcfg);
  }
  return cost;
}

template <class Problem>
std::vector<double> residual_norms(const Problem& problem, const typename Problem::State& state) {
  std::vector<double> out(problem.factor_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = problem.residual(state, i).norm();
  return out;
}

}  // namespace detail

// One inner robust solve with a fixed mu per factor. mus[i] is ignored for
// non-robust factors.
template <class Problem>
InnerResult<typename Problem::State> optimize_inner(const Problem& problem, typename Problem::State state,
                                                    std::span<const double> mus, const SolverConfig& cfg,
                                                    const KernelConfig& kcfg) {
  constexpr int R = Problem::kResidualDim;
  constexpr int B = Problem::kBlockDim;
  const std::size_t nf = problem.factor_count();
  if (mus.size() != nf) throw ContractError("optimize_inner: one mu per factor required");
  for (double mu : mus) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("optimize_inner: mu outside [0, 1]");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(problem.block_count()) * B;

  InnerStats stats;
  double cost = detail::total_cost(problem, state, mus, kcfg);
  stats.initial_cost = cost;
  stats.cost_trace.push_back(cost);

  if (n == 0 || nf == 0) {
    stats.final_cost = cost;
    std::vector<double> residuals = detail::residual_norms(problem, state);
    return {std::move(state), std::move(residuals), std::move(stats)};
  }

  double lambda = cfg.lm_lambda_init;
  Linearization<R, B> lin;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::SparseMatrix<double> hessian(n, n);
  Eigen::SparseMatrix<double> damped(n, n);
  Eigen::VectorXd gradient(n);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool pattern_ready = false;

  for (int iter = 0; iter < cfg.max_inner_iters; ++iter) {
    // Assemble the IRLS normal equations in factor order.
    triplets.clear();
    gradient.setZero();
    for (std::size_t i = 0; i < nf; ++i) {
      problem.linearize(state, i, lin);
      const double r = lin.residual.norm();
      const double w = problem.robust(i) ? detail::weight_unchecked(r, mus[i], kcfg.c) : 1.0;
      for (int a = 0; a < 2; ++a) {
        if (lin.blocks[a] < 0) continue;
        const Eigen::Index oa = static_cast<Eigen::Index>(lin.blocks[a]) * B;
        gradient.segment<B>(oa) += w * lin.jacobians[a].transpose() * lin.residual;
        for (int b = 0; b < 2; ++b) {
          if (lin.blocks[b] < 0) continue;
          const Eigen::Index ob = static_cast<Eigen::Index>(lin.blocks[b]) * B;
          const Eigen::Matrix<double, B, B> h = w * lin.jacobians[a].transpose() * lin.jacobians[b];
          for (int p = 0; p < B; ++p) {
            for (int q = 0; q < B; ++q) {
              if (oa + p >= ob + q) triplets.emplace_back(oa + p, ob + q, h(p, q));
            }
          }
        }
      }
    }
    // Keep the diagonal structurally present so damping never changes the pattern.
    for (Eigen::Index k = 0; k < n; ++k) triplets.emplace_back(k, k, 0.0);
    hessian.setFromTriplets(triplets.begin(), triplets.end());
    ++stats.iterations;

    if (gradient.cwiseAbs().maxCoeff() < cfg.abs_grad_tol) break;

    const Eigen::VectorXd diag = hessian.diagonal().cwiseMax(1e-9);
    bool accepted = false;
    double rel_decrease = 0.0;
    while (!accepted) {
      damped = hessian;
      for (Eigen::Index k = 0; k < n; ++k) damped.coeffRef(k, k) += lambda * diag(k);
      if (!pattern_ready) {
        ldlt.analyzePattern(damped);
        pattern_ready = true;
      }
      ldlt.factorize(damped);
      bool ok = ldlt.info() == Eigen::Success;
      Eigen::VectorXd delta;
      if (ok) {
        delta = ldlt.solve(-gradient);
        ok = delta.allFinite() && (ldlt.vectorD().array() > 0.0).all();
      }
      if (!ok) {
        lambda *= cfg.lm_lambda_factor;
        if (lambda > detail::kMaxLambda) {
          throw NumericalError("optimize_inner: normal equations not positive definite at maximum damping",
                               stats.cost_trace);
        }
        continue;
      }
      typename Problem::State candidate = problem.retract(state, delta);
      const double new_cost = detail::total_cost(problem, candidate, mus, kcfg);
      if (std::isfinite(new_cost) && new_cost <= cost) {
        rel_decrease = cost > 0.0 ? (cost - new_cost) / cost : 0.0;
        state = std::move(candidate);
        cost = new_cost;
        stats.cost_trace.push_back(cost);
        ++stats.accepted_steps;
        lambda = std::max(lambda / cfg.lm_lambda_factor, 1e-12);
        accepted = true;
      } else {
        lambda *= cfg.lm_lambda_factor;
        if (lambda > detail::kMaxLambda) break;  // no descent direction left
      }
    }
    if (!accepted || rel_decrease < cfg.rel_cost_tol) break;
  }
  stats.final_cost = cost;
  std::vector<double> residuals = detail::residual_norms(problem, state);
  return {std::move(state), std::move(residuals), std::move(stats)};
}

// Outcome of a full GNC run on a generic problem.
template <class State>
struct GncRun {
  State state;
  std::vector<std::vector<MuRecord>> mu_history;  // per factor; empty for non-robust factors
  int outer_iterations = 0;
  int inner_iterations_total = 0;
  std::vector<int> inner_iterations_per_stage;
  std::vector<double> final_residuals;
  std::vector<Classification> classification;
  std::vector<FactorScheduleState> schedule;  // final per-factor schedule state (efficient mode)
};

// Called after each outer stage with (stage index, state, per-factor mu).
template <class State>
using StageObserver = std::function<void(int, const State&, std::span<const double>)>;

template <class Problem>
GncRun<typename Problem::State> run_gnc(const Problem& problem, typename Problem::State state,
                                        const SolverConfig& cfg, const KernelConfig& kcfg,
                                        const StageObserver<typename Problem::State>& observer = {}) {
  cfg.validate();
  kcfg.validate();
  const std::size_t nf = problem.factor_count();
  const ChiSquareGate strong_gate = ChiSquareGate::make(kStrongOutlierP, Problem::kResidualDim);

  GncRun<typename Problem::State> run;
  run.mu_history.resize(nf);
  std::vector<double> mus(nf, 1.0);
  std::vector<std::size_t> robust_ids;
  for (std::size_t i = 0; i < nf; ++i) {
    if (problem.robust(i)) robust_ids.push_back(i);
  }

  auto stage = [&](int outer) {
    for (std::size_t i : robust_ids) run.mu_history[i].push_back({outer, mus[i]});
    auto inner = optimize_inner(problem, std::move(state), mus, cfg, kcfg);
    state = std::move(inner.state);
    run.inner_iterations_total += inner.stats.iterations;
    run.inner_iterations_per_stage.push_back(inner.stats.iterations);
    logger().debug("gnc stage {}: cost {} -> {} in {} iterations", outer, inner.stats.initial_cost,
                   inner.stats.final_cost, inner.stats.iterations);
    if (observer) observer(outer, state, mus);
    return std::move(inner.residuals);
  };

  if (cfg.schedule_kind == ScheduleKind::Efficient) {
    std::vector<FactorScheduleState> states;
    states.reserve(robust_ids.size());
    for (std::size_t i : robust_ids) states.push_back({i, 0.0, 0, 0});
    std::vector<double> residuals = detail::residual_norms(problem, state);
    int outer = 0;
    do {
      for (auto& s : states) {
        const MuAssignment a = assign_mu(s, residuals[s.factor_id], strong_gate, kcfg);
        s = a.state;
        mus[s.factor_id] = a.mu;
      }
      residuals = stage(outer++);
      std::vector<double> robust_residuals;
      robust_residuals.reserve(states.size());
      for (const auto& s : states) robust_residuals.push_back(residuals[s.factor_id]);
      states = mark_strong_outliers(states, robust_residuals, strong_gate);
    } while (!converged(states, kcfg.mu_tol));
    run.outer_iterations = outer;
    run.schedule = std::move(states);
  } else {
    constexpr double kMuInit = 0.0;
    double mu = kMuInit;
    int outer = 0;
    while (true) {
      for (std::size_t i : robust_ids) mus[i] = mu;
      stage(outer++);
      if (mu >= 1.0 - kcfg.mu_tol || robust_ids.empty()) break;
      mu = baseline_mu_update(mu, kMuInit);
    }
    run.outer_iterations = outer;
  }

  run.final_residuals = detail::residual_norms(problem, state);
  const ChiSquareGate classify_gate = ChiSquareGate::make(kClassificationP, Problem::kResidualDim);
  run.classification.reserve(nf);
  for (double r : run.final_residuals) {
    run.classification.push_back(classify_gate.exceeds(r) ? Classification::Outlier : Classification::Inlier);
  }
  run.state = std::move(state);
  return run;
}

// ---------------------------------------------------------------------------
// Pose graphs

// Adapts a PoseGraph to the solver interface. Poses are held densely in
// ascending id order; the anchor vertex is not a free variable.
template <class P>
class PoseGraphProblem {
 public:
  static constexpr int kResidualDim = PoseTraits<P>::kDim;
  static constexpr int kBlockDim = PoseTraits<P>::kDim;
  using State = std::vector<P>;
  using Matrix = typename PoseTraits<P>::Matrix;

  PoseGraphProblem(const PoseGraph<P>& g, bool robust_on_odometry) {
    g.validate();
    const VertexId anchor = g.anchor_id();
    std::map<VertexId, int> index;
    for (const auto& [id, pose] : g.vertices) {
      index.emplace(id, static_cast<int>(ids_.size()));
      ids_.push_back(id);
      block_.push_back(id == anchor ? -1 : static_cast<int>(blocks_++));
    }
    for (const auto& f : g.factors) {
      factors_.push_back({index.at(f.from_id), index.at(f.to_id), f.measurement, f.whitener(),
                          robust_on_odometry || f.kind == FactorKind::LoopClosure});
    }
  }

  std::size_t factor_count() const { return factors_.size(); }
  std::size_t block_count() const { return blocks_; }
  bool robust(std::size_t i) const { return factors_[i].robust; }

  State initial_state(const PoseGraph<P>& g) const {
    State s;
    s.reserve(ids_.size());
    for (VertexId id : ids_) s.push_back(g.vertices.at(id));
    return s;
  }

  PoseGraph<P> write_back(PoseGraph<P> g, const State& s) const {
    for (std::size_t k = 0; k < ids_.size(); ++k) g.vertices.at(ids_[k]) = s[k];
    return g;
  }

  Eigen::Matrix<double, kResidualDim, 1> residual(const State& s, std::size_t i) const {
    const auto& f = factors_[i];
    return f.whitener * relative_error(f.measurement, s[f.from], s[f.to]);
  }

  void linearize(const State& s, std::size_t i, Linearization<kResidualDim, kBlockDim>& out) const {
    const auto& f = factors_[i];
    const FactorLinearization<P> l = linearize_factor(f.measurement, f.whitener, s[f.from], s[f.to]);
    out.residual = l.residual;
    out.blocks = {block_[f.from], block_[f.to]};
    out.jacobians[0] = l.d_from;
    out.jacobians[1] = l.d_to;
  }

  State retract(const State& s, const Eigen::VectorXd& delta) const {
    State out = s;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (block_[k] < 0) continue;
      const typename PoseTraits<P>::Tangent d = delta.segment<kBlockDim>(static_cast<Eigen::Index>(block_[k]) * kBlockDim);
      out[k] = se_retract(s[k], d);
    }
    return out;
  }

 private:
  struct Entry {
    int from;
    int to;
    P measurement;
    Matrix whitener;
    bool robust;
  };
  std::vector<VertexId> ids_;
  std::vector<int> block_;
  std::size_t blocks_ = 0;
  std::vector<Entry> factors_;
};

template <class P>
struct GncResult {
  PoseGraph<P> poses;
  std::vector<std::vector<MuRecord>> mu_history;
  int outer_iterations = 0;
  int inner_iterations_total = 0;
  std::vector<int> inner_iterations_per_stage;
  std::vector<double> final_residuals;
  std::vector<Classification> classification;
};

template <class P>
GncResult<P> gnc_optimize(const PoseGraph<P>& g, const SolverConfig& cfg, const KernelConfig& kcfg) {
  const PoseGraphProblem<P> problem(g, cfg.robust_on_odometry);
  GncRun<std::vector<P>> run = run_gnc(problem, problem.initial_state(g), cfg, kcfg);
  GncResult<P> out;
  out.poses = problem.write_back(g, run.state);
  out.mu_history = std::move(run.mu_history);
  out.outer_iterations = run.outer_iterations;
  out.inner_iterations_total = run.inner_iterations_total;
  out.inner_iterations_per_stage = std::move(run.inner_iterations_per_stage);
  out.final_residuals = std::move(run.final_residuals);
  out.classification = std::move(run.classification);
  return out;
}

// Single inner solve on a pose graph at fixed per-factor mu.
template <class P>
std::pair<PoseGraph<P>, InnerResult<std::vector<P>>> optimize_inner(const PoseGraph<P>& g,
                                                                    std::span<const double> mus,
                                                                    const SolverConfig& cfg,
                                                                    const KernelConfig& kcfg) {
  const PoseGraphProblem<P> problem(g, cfg.robust_on_odometry);
  auto inner = optimize_inner(problem, problem.initial_state(g), mus, cfg, kcfg);
  return {problem.write_back(g, inner.state), std::move(inner)};
}

}  // namespace pgo
