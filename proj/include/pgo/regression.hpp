#pragma once

// Robust fit of a line through the origin, y = slope * x. Each data point is a
// one-dimensional robust factor with residual (y - slope * x) / sigma. Used for
// the slope-recovery demonstration of the two GNC schedules.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "pgo/errors.hpp"
#include "pgo/solver.hpp"

namespace pgo {

struct LinePoint {
  double x = 0.0;
  double y = 0.0;
  int group = 0;  // index of the generating line; 0 is the inlier model
};

class LineFitProblem {
 public:
  static constexpr int kResidualDim = 1;
  static constexpr int kBlockDim = 1;
  using State = double;

  LineFitProblem(std::vector<LinePoint> points, double sigma) : points_(std::move(points)), sigma_(sigma) {
    if (!(sigma_ > 0.0)) throw DomainError("LineFitProblem: sigma must be positive");
  }

  std::size_t factor_count() const { return points_.size(); }
  std::size_t block_count() const { return 1; }
  bool robust(std::size_t) const { return true; }

  Eigen::Matrix<double, 1, 1> residual(State slope, std::size_t i) const {
    return Eigen::Matrix<double, 1, 1>((points_[i].y - slope * points_[i].x) / sigma_);
  }

  void linearize(State slope, std::size_t i, Linearization<1, 1>& out) const {
    out.residual = residual(slope, i);
    out.blocks = {0, -1};
    out.jacobians[0](0, 0) = -points_[i].x / sigma_;
  }

  State retract(State slope, const Eigen::VectorXd& delta) const { return slope + delta(0); }

  const std::vector<LinePoint>& points() const { return points_; }
  double sigma() const { return sigma_; }

 private:
  std::vector<LinePoint> points_;
  double sigma_;
};

struct LineMixtureComponent {
  double slope = 1.0;
  double fraction = 1.0;
};

// Noiseless mixture with x ~ U[0, 1]. Group sizes are floor(fraction * n) for
// every component but the last, which takes the remainder.
inline std::vector<LinePoint> make_line_mixture(const std::vector<LineMixtureComponent>& components, std::size_t n,
                                                std::uint64_t seed) {
  if (components.empty()) throw DomainError("make_line_mixture: no components");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::vector<LinePoint> pts;
  pts.reserve(n);
  std::size_t used = 0;
  for (std::size_t g = 0; g < components.size(); ++g) {
    const std::size_t count = g + 1 == components.size()
                                  ? n - used
                                  : static_cast<std::size_t>(components[g].fraction * static_cast<double>(n) + 1e-9);
    for (std::size_t k = 0; k < count; ++k) {
      const double x = ux(rng);
      pts.push_back({x, components[g].slope * x, static_cast<int>(g)});
    }
    used += count;
  }
  return pts;
}

}  // namespace pgo
