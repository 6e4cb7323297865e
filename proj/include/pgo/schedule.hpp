#pragma once

// Per-factor state machine of the efficient GNC schedule.
//
// Every factor walks through mu = 0 (convex surrogate), then its convexity
// boundary mu* computed from the residual it has after the convex stage, then
// mu = 1. A factor whose residual fails the chi-square gate skips straight to
// mu = 1 and stays there ("strong outlier").

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "pgo/errors.hpp"
#include "pgo/kernel.hpp"
#include "pgo/log.hpp"

namespace pgo {

// Quantile t with P(chi2_dim <= t) = p.
inline double chi2_quantile(double p, int dim) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in (0, 1)");
  if (dim < 1) throw DomainError("chi2_quantile: dim must be >= 1");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dim), p);
}

// Mahalanobis gate: squared whitened residual norms are compared against the
// cached chi-square quantile.
struct ChiSquareGate {
  double p = 0.9;
  int dim = 1;
  double threshold = 0.0;

  static ChiSquareGate make(double p, int dim) { return {p, dim, chi2_quantile(p, dim)}; }

  bool passes(double r) const { return r * r < threshold; }
  bool exceeds(double r) const { return r * r > threshold; }
};

inline constexpr int kStrongOutlierStep = 2;

struct FactorScheduleState {
  std::size_t factor_id = 0;
  double mu = 0.0;
  int step = 0;
  int init_step = 0;  // 0, or kStrongOutlierStep once flagged

  bool operator==(const FactorScheduleState&) const = default;
};

enum class MuSource {
  Convex,           // first stage, mu = 0
  Boundary,         // root of d2rho/dr2 at the current residual
  ConvexEverywhere, // no root on [0,1]; clamped to 1
  Saturated,        // gate failed, strong outlier, or past the boundary stage
};

struct MuAssignment {
  FactorScheduleState state;
  double mu = 0.0;
  MuSource source = MuSource::Convex;
};

// r_i is the whitened residual norm; gate is built at p = 0.9 for the
// factor's residual dimension.
inline MuAssignment assign_mu(FactorScheduleState state, double r_i, const ChiSquareGate& gate,
                              const KernelConfig& cfg) {
  if (!(r_i >= 0.0) || !std::isfinite(r_i)) throw DomainError("assign_mu: residual must be finite and >= 0");
  if (state.init_step == kStrongOutlierStep) state.step = std::max(state.step, kStrongOutlierStep);

  MuAssignment out;
  if (state.step == 0) {
    out.mu = 0.0;
    out.source = MuSource::Convex;
  } else if (state.step == 1 && gate.passes(r_i)) {
    const MuStar m = find_mu_star(r_i, cfg);
    out.mu = std::min(m.mu, 1.0);
    out.source = m.at_boundary ? MuSource::ConvexEverywhere : MuSource::Boundary;
  } else {
    out.mu = 1.0;
    out.source = MuSource::Saturated;
  }
  state.step += 1;
  state.mu = out.mu;
  out.state = state;
  return out;
}

// Flags every factor whose residual exceeds its gate; gates[i] belongs to
// states[i]. A single gate may be passed for homogeneous graphs.
inline std::vector<FactorScheduleState> mark_strong_outliers(std::span<const FactorScheduleState> states,
                                                             std::span<const double> residuals,
                                                             std::span<const ChiSquareGate> gates) {
  if (states.size() != residuals.size()) {
    throw ContractError("mark_strong_outliers: " + std::to_string(states.size()) + " states but " +
                        std::to_string(residuals.size()) + " residuals");
  }
  if (gates.size() != 1 && gates.size() != states.size()) {
    throw ContractError("mark_strong_outliers: gate count must be 1 or match the state count");
  }
  std::vector<FactorScheduleState> out(states.begin(), states.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const ChiSquareGate& gate = gates.size() == 1 ? gates[0] : gates[i];
    if (gate.exceeds(residuals[i])) out[i].init_step = kStrongOutlierStep;
  }
  return out;
}

inline std::vector<FactorScheduleState> mark_strong_outliers(std::span<const FactorScheduleState> states,
                                                             std::span<const double> residuals,
                                                             const ChiSquareGate& gate) {
  return mark_strong_outliers(states, residuals, std::span<const ChiSquareGate>(&gate, 1));
}

inline bool converged(std::span<const FactorScheduleState> states, double mu_tol = KernelConfig{}.mu_tol) {
  if (states.empty()) {
    logger().debug("converged: empty schedule, nothing to do");
    return true;
  }
  return std::all_of(states.begin(), states.end(),
                     [mu_tol](const FactorScheduleState& s) { return s.mu >= 1.0 - mu_tol; });
}

}  // namespace pgo
