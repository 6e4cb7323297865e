#pragma once

// Scale Invariant Graduated (SIG) kernel
//
//   rho(r; mu) = 1/2 * c^2 r^2 / (c^2 + (r^2)^mu),   mu in [0, 1]
//
// mu = 0 is the convex quadratic 1/2 c^2 r^2 / (c^2 + 1) and mu = 1 is the
// Geman-McClure kernel. For a fixed residual r the second derivative with
// respect to r crosses zero at a convexity boundary mu*, which is what the
// efficient GNC schedule assigns as the intermediate control parameter.
//
// (r^2)^mu is always evaluated with 0^0 = 1, so mu = 0 is the quadratic
// everywhere including r = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "pgo/errors.hpp"
#include "pgo/log.hpp"

namespace pgo {

struct KernelConfig {
  double c = 1.0;
  double mu_tol = 1e-6;   // bisection tolerance on mu
  double d2_tol = 1e-8;   // |d2rho/dr2| below this counts as zero
  int max_bisect_iters = 100;

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("kernel.c must be positive");
    if (!(mu_tol > 0.0)) throw DomainError("kernel.mu_tol must be positive");
    if (!(d2_tol > 0.0)) throw DomainError("kernel.d2_tol must be positive");
    if (max_bisect_iters < 1) throw DomainError("kernel.max_bisect_iters must be >= 1");
  }
};

struct KernelEval {
  double rho = 0.0;
  double weight = 0.0;  // rho'(r) / r, the IRLS weight
  double d2 = 0.0;      // d2rho / dr2
};

struct MuStar {
  double mu = 1.0;
  // True when no zero of d2rho/dr2 exists on [0,1] and mu was clamped to 1.
  bool at_boundary = true;
};

namespace detail {

inline void check_kernel_args(double r, double mu) {
  if (!std::isfinite(r)) throw DomainError("kernel residual must be finite");
  if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("kernel mu must lie in [0, 1], got " + std::to_string(mu));
}

// (r^2)^mu with 0^0 = 1 (std::pow already follows this convention).
inline double pow_r2(double r, double mu) { return std::pow(r * r, mu); }

// Unchecked evaluations for inner loops that have already validated inputs.
inline double rho_unchecked(double r, double mu, double c) {
  const double c2 = c * c;
  return 0.5 * c2 * r * r / (c2 + pow_r2(r, mu));
}

inline double weight_unchecked(double r, double mu, double c) {
  const double c2 = c * c;
  const double s = pow_r2(r, mu);
  const double den = c2 + s;
  return c2 * (c2 + (1.0 - mu) * s) / (den * den);
}

inline double d2_unchecked(double r, double mu, double c) {
  const double c2 = c * c;
  const double s = pow_r2(r, mu);
  const double den = c2 + s;
  const double den2 = den * den;
  return 4.0 * c2 * mu * mu * s * s / (den2 * den)
       - 2.0 * c2 * mu * mu * s / den2
       - 3.0 * c2 * mu * s / den2
       + c2 / den;
}

}  // namespace detail

inline double sig_rho(double r, double mu, const KernelConfig& cfg) {
  detail::check_kernel_args(r, mu);
  return detail::rho_unchecked(r, mu, cfg.c);
}

// rho'(r)/r = c^2 (c^2 + (1 - mu) (r^2)^mu) / (c^2 + (r^2)^mu)^2. Finite at r = 0.
inline double sig_weight(double r, double mu, const KernelConfig& cfg) {
  detail::check_kernel_args(r, mu);
  return detail::weight_unchecked(r, mu, cfg.c);
}

inline double sig_d2(double r, double mu, const KernelConfig& cfg) {
  detail::check_kernel_args(r, mu);
  return detail::d2_unchecked(r, mu, cfg.c);
}

inline KernelEval sig_eval(double r, double mu, const KernelConfig& cfg) {
  detail::check_kernel_args(r, mu);
  return {detail::rho_unchecked(r, mu, cfg.c), detail::weight_unchecked(r, mu, cfg.c),
          detail::d2_unchecked(r, mu, cfg.c)};
}

// Number of uniformly spaced mu samples used to bracket the convexity boundary.
inline constexpr std::size_t kMuGridSize = 32;

inline double mu_grid_point(std::size_t k) {
  return static_cast<double>(k) / static_cast<double>(kMuGridSize - 1);
}

// Largest mu on [0,1] that keeps the kernel convex at residual r_i, i.e. the
// smallest zero of d2rho/dr2(r_i, .). A 32-point grid locates the first sign
// change, which is then bisected until the interval is below mu_tol and
// |d2| <= d2_tol. Small residuals never lose convexity; those return mu = 1
// with at_boundary set.
inline MuStar find_mu_star(double r_i, const KernelConfig& cfg) {
  detail::check_kernel_args(r_i, 0.0);
  if (r_i == 0.0) return {1.0, true};
  const double c = cfg.c;

  std::array<double, kMuGridSize> d2{};
  for (std::size_t k = 0; k < kMuGridSize; ++k) d2[k] = detail::d2_unchecked(r_i, mu_grid_point(k), c);

  std::size_t first = kMuGridSize;
  std::size_t sign_changes = 0;
  for (std::size_t k = 1; k < kMuGridSize; ++k) {
    if ((d2[k - 1] > 0.0) != (d2[k] > 0.0)) {
      ++sign_changes;
      if (first == kMuGridSize && d2[k] <= 0.0) first = k;
    }
  }
  if (sign_changes > 1) {
    logger().debug("find_mu_star: {} sign changes of d2rho/dr2 at r={}, using the smallest root", sign_changes, r_i);
  }

  // For small c the curvature can dip below zero between two grid points
  // and come back up. Probe each grid-level local minimum ahead of the first
  // bracket with a golden-section search.
  double lo = 0.0;
  double hi = 0.0;
  bool have_bracket = false;
  const std::size_t scan_end = std::min(first, kMuGridSize - 1);
  for (std::size_t k = 1; k < scan_end && !have_bracket; ++k) {
    if (!(d2[k] <= d2[k - 1] && d2[k] <= d2[k + 1])) continue;
    const auto f = [&](double mu) { return detail::d2_unchecked(r_i, mu, c); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = mu_grid_point(k - 1);
    double b = mu_grid_point(k + 1);
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < 80 && f1 > 0.0 && f2 > 0.0; ++it) {
      if (f1 < f2) {
        b = x2, x2 = x1, f2 = f1, x1 = b - g * (b - a), f1 = f(x1);
      } else {
        a = x1, x1 = x2, f1 = f2, x2 = a + g * (b - a), f2 = f(x2);
      }
    }
    const double neg = f1 <= 0.0 ? x1 : (f2 <= 0.0 ? x2 : -1.0);
    if (neg >= 0.0) {
      logger().debug("find_mu_star: sub-grid negative curvature near mu={} at r={}", neg, r_i);
      lo = mu_grid_point(k - 1);
      hi = neg;
      have_bracket = true;
    }
  }

  if (!have_bracket && first == kMuGridSize) {
    // Convex on the whole grid. A zero sitting exactly at mu = 1 (to d2_tol)
    // is still a genuine root.
    if (std::abs(d2.back()) <= cfg.d2_tol) return {1.0, false};
    return {1.0, true};
  }
  if (!have_bracket) {
    if (d2[first] == 0.0) return {mu_grid_point(first), false};
    lo = mu_grid_point(first - 1);  // d2(lo) > 0
    hi = mu_grid_point(first);      // d2(hi) <= 0
  }
  for (int it = 0; it < cfg.max_bisect_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = detail::d2_unchecked(r_i, mid, c);
    if (std::abs(v) <= cfg.d2_tol && (hi - lo) <= cfg.mu_tol) return {mid, false};
    if (mid == lo || mid == hi) break;  // interval exhausted at machine precision
    if (v > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NumericalError("find_mu_star: bisection did not converge at r=" + std::to_string(r_i), lo, hi);
}

// Heuristic schedule used as the comparison baseline:
//   mu_{k+1} = min(1, mu_k + 1.2 (mu_k - mu_init + 0.1))
inline double baseline_mu_update(double mu, double mu_init) {
  if (!(mu_init >= 0.0 && mu_init <= mu && mu <= 1.0)) {
    throw DomainError("baseline_mu_update requires 0 <= mu_init <= mu <= 1");
  }
  return std::min(1.0, mu + 1.2 * (mu - mu_init + 0.1));
}

}  // namespace pgo
