#pragma once

// Manhattan-style SE(2) dataset: a robot walks unit steps on a bounded grid,
// turning by multiples of 90 degrees, and every revisit of a grid cell at
// least min_loop_gap poses later is a loop-closure candidate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "pgo/posegraph.hpp"

namespace pgo {

struct GridWorldOptions {
  std::size_t poses = 300;
  std::size_t target_loops = 80;
  int grid_cells = 8;
  double step = 1.0;
  std::size_t min_loop_gap = 10;
  // Standard deviations encoded in the information matrices.
  Eigen::Vector3d model_sigma{0.1, 0.1, 0.02};
  // Measurement noise actually applied, as a multiple of model_sigma. Zero
  // gives exactly consistent measurements.
  double noise_scale = 0.25;
  std::uint64_t seed = 1;
};

struct GridWorld {
  PoseGraph2 ground_truth;  // ground-truth vertices, noise-free measurements
  PoseGraph2 measured;      // ground-truth vertices, noisy measurements
};

inline GridWorld make_grid_world(const GridWorldOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);

  static constexpr std::array<std::array<int, 2>, 4> kDirs{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
  std::vector<std::array<int, 2>> cells;
  std::vector<Pose2> poses;
  std::array<int, 2> cell{0, 0};
  int heading = 0;
  cells.push_back(cell);
  poses.emplace_back(0.0, 0.0, 0.0);
  auto inside = [&](const std::array<int, 2>& c) {
    return c[0] >= 0 && c[1] >= 0 && c[0] < opt.grid_cells && c[1] < opt.grid_cells;
  };
  while (poses.size() < opt.poses) {
    const double u = u01(rng);
    int turn = u < 0.2 ? 1 : (u < 0.4 ? 3 : 0);
    for (int attempt = 0; attempt < 4; ++attempt) {
      const int h = (heading + turn + attempt) % 4;
      const std::array<int, 2> next{cell[0] + kDirs[h][0], cell[1] + kDirs[h][1]};
      if (inside(next)) {
        heading = h;
        cell = next;
        break;
      }
    }
    cells.push_back(cell);
    poses.emplace_back(opt.step * cell[0], opt.step * cell[1], heading * std::numbers::pi / 2.0);
  }

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t j = 0; j < poses.size(); ++j) {
    for (std::size_t i = 0; i + opt.min_loop_gap <= j; ++i) {
      if (cells[i] == cells[j]) candidates.emplace_back(i, j);
    }
  }
  std::shuffle(candidates.begin(), candidates.end(), rng);
  if (candidates.size() > opt.target_loops) candidates.resize(opt.target_loops);
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.second != b.second ? a.second < b.second : a.first < b.first; });

  Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) info(k, k) = 1.0 / (opt.model_sigma(k) * opt.model_sigma(k));

  GridWorld w;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    w.ground_truth.vertices.emplace(static_cast<VertexId>(k), poses[k]);
  }
  auto add = [&](std::size_t i, std::size_t j, FactorKind kind) {
    Factor<Pose2> f;
    f.kind = kind;
    f.from_id = static_cast<VertexId>(i);
    f.to_id = static_cast<VertexId>(j);
    f.measurement = se_compose(se_inverse(poses[i]), poses[j]);
    f.information = info;
    w.ground_truth.factors.push_back(f);
  };
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) add(k, k + 1, FactorKind::Odometry);
  for (const auto& [i, j] : candidates) add(i, j, FactorKind::LoopClosure);

  w.measured = w.ground_truth;
  if (opt.noise_scale > 0.0) {
    for (auto& f : w.measured.factors) {
      Eigen::Vector3d eps;
      for (int k = 0; k < 3; ++k) eps(k) = opt.noise_scale * opt.model_sigma(k) * n01(rng);
      f.measurement = se_compose(f.measurement, se_exp(eps));
    }
  }
  return w;
}

}  // namespace pgo
