// Grid-world run: inject false loop closures, optimize with both schedules
// from a dead-reckoned start, and print classification scores, iteration
// counts and trajectory errors.
//
//   false_loops [ratio] [seed]

#include <cstdlib>
#include <iostream>

#include <fmt/format.h>

#include "pgo/pgo.hpp"

int main(int argc, char** argv) {
  using namespace pgo;
  const double ratio = argc > 1 ? std::atof(argv[1]) : 0.3;
  const auto seed = static_cast<std::uint64_t>(argc > 2 ? std::atoll(argv[2]) : 1);

  GridWorldOptions wo;
  wo.seed = seed;
  const GridWorld world = make_grid_world(wo);

  CorruptionSpec spec;
  spec.mode = CorruptionMode::FalseLoops;
  spec.outlier_ratio = ratio;
  spec.seed = seed;
  const PoseGraph2 corrupted = inject_false_loops(world.measured, spec);
  const auto labels = true_outlier_labels(corrupted);
  const PoseGraph2 init = initialize_from_odometry(corrupted);

  fmt::print("{} poses, {} loops ({} injected)\n", corrupted.vertices.size(), corrupted.loop_count(),
             corrupted.loop_count() - world.measured.loop_count());
  fmt::print("odometry start: ATE {:.3f} m\n", ate(init.vertices, world.ground_truth.vertices));

  for (ScheduleKind kind : {ScheduleKind::Efficient, ScheduleKind::Baseline}) {
    SolverConfig cfg;
    cfg.schedule_kind = kind;
    const auto r = gnc_optimize(init, cfg, KernelConfig{});
    const auto cls = score_classification(r, labels);
    const auto te = trajectory_errors(r.poses.vertices, world.ground_truth.vertices);
    fmt::print("{:>9}: precision {:.3f} recall {:.3f}, outer {} inner {}, ATE {:.3f} m, RPE {:.2f} %\n",
               to_string(kind), cls.precision, cls.recall, r.outer_iterations, r.inner_iterations_total, te.ate,
               te.rpe);
  }
  return 0;
}
