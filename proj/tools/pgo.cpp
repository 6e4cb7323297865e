#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

pgo::KeyValues read_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return pgo::parse_key_values(in);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pgo::cli;
  CLI::App app{"Robust pose-graph optimization with graduated non-convexity"};
  app.require_subcommand(1);

  OptimizeOptions opt;
  std::string opt_config, opt_schedule;
  auto* optimize = app.add_subcommand("optimize", "Optimize a g2o pose graph");
  optimize->add_option("--graph", opt.graph, "Input g2o file")->required()->check(CLI::ExistingFile);
  optimize->add_option("--schedule", opt_schedule, "efficient or baseline")
      ->check(CLI::IsMember({"efficient", "baseline"}));
  optimize->add_option("--config", opt_config, "key = value config file")->check(CLI::ExistingFile);
  optimize->add_option("--labels", opt.labels, "Optional label sidecar")->check(CLI::ExistingFile);
  optimize->add_option("--out", opt.out, "Output directory")->required();

  CorruptOptions cor;
  std::string cor_spec;
  auto* corrupt = app.add_subcommand("corrupt", "Corrupt a ground-truth graph");
  corrupt->add_option("--graph", cor.graph, "Input g2o file")->required()->check(CLI::ExistingFile);
  corrupt->add_option("--spec", cor_spec, "corrupt.* config file")->required()->check(CLI::ExistingFile);
  corrupt->add_option("--out", cor.out, "Output directory")->required();

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Score an optimize run");
  eval->add_option("--run", ev.run, "Output directory of pgo optimize")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--labels", ev.labels, "Label sidecar")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ev.gt, "Ground truth (g2o or trajectory csv)")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", ev.out, "Output directory (default <run>/eval)");

  DemoOptions demo_opt;
  auto* demo = app.add_subcommand("demo", "Three-line slope regression under both schedules");
  demo->add_option("--out", demo_opt.out, "Output directory")->required();
  demo->add_option("--seed", demo_opt.seed, "Sampling seed")->capture_default_str();
  demo->add_option("--points", demo_opt.points, "Number of points")->capture_default_str();
  demo->add_option("--init", demo_opt.init, "Initial slope")->capture_default_str();
  demo->add_option("--c", demo_opt.c, "Kernel scale c")->capture_default_str();
  demo->add_option("--sigma", demo_opt.sigma, "Point residual scale")->capture_default_str();

  std::string replay_manifest, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs byte for byte");
  replay->add_option("--manifest", replay_manifest, "manifest.json of a previous run")
      ->required()
      ->check(CLI::ExistingFile);
  replay->add_option("--out", replay_out, "Fresh output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*optimize) {
      opt.config = read_config(opt_config);
      if (!opt_schedule.empty()) opt.config["solver.schedule"] = opt_schedule;
      return run_optimize(opt, std::cerr);
    }
    if (*corrupt) {
      cor.spec = read_config(cor_spec);
      return run_corrupt(cor, std::cerr);
    }
    if (*eval) return run_eval(ev, std::cerr);
    if (*demo) return run_demo(demo_opt, std::cerr);
    if (*replay) return run_replay(replay_manifest, replay_out, std::cerr);
  } catch (const pgo::ParseError& e) {
    std::cerr << "pgo: parse error at line " << e.line() << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "pgo: " << e.what() << "\n";
  }
  return kInputError;
}
