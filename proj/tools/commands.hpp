#pragma once

// Command implementations behind the `pgo` executable. Each command writes its
// outputs plus manifest.json into an output directory. A manifest records
// everything needed to re-run the command (`pgo replay`), and every output
// except the manifest itself is a deterministic function of it.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "pgo/pgo.hpp"

#ifndef PGO_VERSION
#define PGO_VERSION "0.0.0"
#endif

namespace pgo::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kInputError = 1, kNumericalFailure = 2 };

struct OptimizeOptions {
  std::string graph;
  std::string labels;  // optional sidecar
  std::string out;
  KeyValues config;    // kernel.* / solver.* keys
};

struct CorruptOptions {
  std::string graph;
  std::string out;
  KeyValues spec;  // corrupt.* keys
};

struct EvalOptions {
  std::string run;
  std::string labels;
  std::string gt;
  std::string out;  // defaults to <run>/eval
};

struct DemoOptions {
  std::string out;
  std::uint64_t seed = 1;
  std::size_t points = 200;
  double init = 7.5;
  double c = 0.05;
  double sigma = 2.0;
};

namespace detail {

inline std::string g17(double v) { return fmt::format("{:.17g}", v); }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

inline std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

inline Json key_values_json(const KeyValues& kv) {
  Json j = Json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

inline KeyValues key_values_from_json(const Json& j) {
  KeyValues kv;
  for (const auto& [k, v] : j.items()) kv[k] = v.get<std::string>();
  return kv;
}

struct Manifest {
  std::string command;
  Json inputs = Json::object();
  KeyValues config;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  Json iterations = Json::object();
  double wall_time_s = 0.0;
};

inline void write_manifest(const fs::path& out, const Manifest& m) {
  Json j;
  j["tool"] = "pgo";
  j["version"] = PGO_VERSION;
  j["command"] = m.command;
  j["inputs"] = m.inputs;
  j["config"] = key_values_json(m.config);
  j["seed"] = m.seed;
  j["out_dir"] = absolute(out.string());
  j["outputs"] = m.outputs;
  j["iterations"] = m.iterations;
  j["wall_time_s"] = m.wall_time_s;
  write_file(out / "manifest.json", j.dump(2) + "\n");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Runs fn and maps exceptions onto exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "pgo: numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const ParseError& e) {
    err << "pgo: parse error at line " << e.line() << ": " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "pgo: " << e.what() << "\n";
    return kInputError;
  }
}

template <class P>
Json result_json(const GncResult<P>& r, ScheduleKind schedule) {
  Json j;
  j["schedule"] = to_string(schedule);
  j["dimension"] = PoseTraits<P>::kTranslationDim;
  j["outer_iterations"] = r.outer_iterations;
  j["inner_iterations_total"] = r.inner_iterations_total;
  j["inner_iterations_per_stage"] = r.inner_iterations_per_stage;
  Json factors = Json::array();
  for (std::size_t i = 0; i < r.poses.factors.size(); ++i) {
    const auto& f = r.poses.factors[i];
    Json fj;
    fj["index"] = i;
    fj["from"] = f.from_id;
    fj["to"] = f.to_id;
    fj["kind"] = to_string(f.kind);
    fj["residual"] = r.final_residuals[i];
    fj["classification"] = to_string(r.classification[i]);
    Json hist = Json::array();
    for (const auto& rec : r.mu_history[i]) hist.push_back(Json::array({rec.outer_iteration, rec.mu}));
    fj["mu_history"] = hist;
    factors.push_back(fj);
  }
  j["factors"] = factors;
  return j;
}

template <class P>
std::map<VertexId, P> load_trajectory(const std::string& path) {
  if (path.ends_with(".csv")) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_trajectory_csv<P>(in);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_g2o_as<P>(in).vertices;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run_optimize(const OptimizeOptions& opt, std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Stopwatch clock;
    const RunConfig rc = run_config_from(opt.config);
    AnyPoseGraph any = load_g2o(opt.graph);
    const fs::path out(opt.out);
    fs::create_directories(out);

    detail::Manifest m;
    m.command = "optimize";
    m.inputs["graph"] = detail::absolute(opt.graph);
    if (!opt.labels.empty()) m.inputs["labels"] = detail::absolute(opt.labels);
    m.config = to_key_values(rc);
    m.outputs = {"optimized.g2o", "trajectory.csv", "result.json", "factors.csv"};

    std::visit(
        [&](auto& g) {
          using P = typename std::decay_t<decltype(g)>::Pose;
          if (!opt.labels.empty()) {
            std::ifstream in(opt.labels);
            if (!in) throw std::runtime_error("cannot open " + opt.labels);
            apply_labels(g, parse_labels(in, g.factors.size()));
          }
          if (rc.init == InitMode::Odometry) g = initialize_from_odometry(g);
          const GncResult<P> r = gnc_optimize(g, rc.solver, rc.kernel);

          std::ostringstream g2o, traj, factors;
          serialize_g2o(r.poses, g2o);
          write_trajectory_csv(r.poses, traj);
          write_factor_csv(r.poses, std::span<const double>(r.final_residuals),
                           std::span<const std::vector<MuRecord>>(r.mu_history),
                           std::span<const Classification>(r.classification), factors);
          detail::write_file(out / "optimized.g2o", g2o.str());
          detail::write_file(out / "trajectory.csv", traj.str());
          detail::write_file(out / "result.json", detail::result_json(r, rc.solver.schedule_kind).dump(2) + "\n");
          detail::write_file(out / "factors.csv", factors.str());
          m.iterations["outer"] = r.outer_iterations;
          m.iterations["inner_total"] = r.inner_iterations_total;
        },
        any);
    m.wall_time_s = clock.seconds();
    detail::write_manifest(out, m);
    return static_cast<int>(kOk);
  });
}

inline int run_corrupt(const CorruptOptions& opt, std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Stopwatch clock;
    const CorruptionSpec spec = corruption_spec_from(opt.spec);
    const AnyPoseGraph any = load_g2o(opt.graph);
    const fs::path out(opt.out);
    fs::create_directories(out);
    std::visit(
        [&](const auto& g) {
          const auto c = spec.mode == CorruptionMode::FalseLoops ? inject_false_loops(g, spec) : perturb(g, spec);
          std::ostringstream g2o, labels;
          serialize_g2o(c, g2o);
          write_labels(c, labels);
          detail::write_file(out / "corrupted.g2o", g2o.str());
          detail::write_file(out / "labels.txt", labels.str());
        },
        any);
    const KeyValues snapshot = to_key_values(spec);
    detail::write_file(out / "spec.cfg", format_key_values(snapshot));

    detail::Manifest m;
    m.command = "corrupt";
    m.inputs["graph"] = detail::absolute(opt.graph);
    m.config = snapshot;
    m.seed = spec.seed;
    m.outputs = {"corrupted.g2o", "labels.txt", "spec.cfg"};
    m.wall_time_s = clock.seconds();
    detail::write_manifest(out, m);
    return static_cast<int>(kOk);
  });
}

inline int run_eval(const EvalOptions& opt, std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Stopwatch clock;
    const fs::path run(opt.run);
    const Json result = Json::parse(detail::read_file(run / "result.json"));
    const auto& factors = result.at("factors");

    std::vector<Classification> predicted;
    std::vector<FactorKind> kinds;
    for (const auto& f : factors) {
      predicted.push_back(f.at("classification").get<std::string>() == "outlier" ? Classification::Outlier
                                                                                 : Classification::Inlier);
      kinds.push_back(f.at("kind").get<std::string>() == "loop" ? FactorKind::LoopClosure : FactorKind::Odometry);
    }
    std::ifstream lin(opt.labels);
    if (!lin) throw std::runtime_error("cannot open " + opt.labels);
    const auto labels = parse_labels(lin, predicted.size());
    std::vector<bool> truth;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      truth.push_back(labels[i].outlier);
      if (labels[i].kind) kinds[i] = *labels[i].kind;
    }
    const ClassificationReport cls = score_classification(predicted, truth, kinds);

    TrajectoryErrors te;
    const int dim = result.at("dimension").get<int>();
    if (dim == 2) {
      te = trajectory_errors(detail::load_trajectory<Pose2>((run / "trajectory.csv").string()),
                             detail::load_trajectory<Pose2>(opt.gt));
    } else {
      te = trajectory_errors(detail::load_trajectory<Pose3>((run / "trajectory.csv").string()),
                             detail::load_trajectory<Pose3>(opt.gt));
    }

    const fs::path out = opt.out.empty() ? run / "eval" : fs::path(opt.out);
    fs::create_directories(out);
    Json j;
    j["classification"] = to_json(cls);
    j["trajectory"] = to_json(te);
    detail::write_file(out / "eval.json", j.dump(2) + "\n");
    detail::write_file(out / "eval.txt", format_report(cls, &te));

    detail::Manifest m;
    m.command = "eval";
    m.inputs["run"] = detail::absolute(opt.run);
    m.inputs["labels"] = detail::absolute(opt.labels);
    m.inputs["gt"] = detail::absolute(opt.gt);
    m.outputs = {"eval.json", "eval.txt"};
    m.wall_time_s = clock.seconds();
    detail::write_manifest(out, m);
    return static_cast<int>(kOk);
  });
}

// The three-line mixture: 55% on y = x, 15% on y = 5x, 30% on y = 10x.
inline const std::vector<LineMixtureComponent>& demo_mixture() {
  static const std::vector<LineMixtureComponent> m{{1.0, 0.55}, {5.0, 0.15}, {10.0, 0.30}};
  return m;
}

struct DemoRun {
  GncRun<double> run;
  std::vector<double> stage_slopes;
  std::vector<std::vector<double>> stage_mus;
};

inline DemoRun run_demo_schedule(const LineFitProblem& problem, ScheduleKind kind, double init, double c) {
  SolverConfig cfg;
  cfg.schedule_kind = kind;
  DemoRun d;
  const StageObserver<double> obs = [&](int, const double& slope, std::span<const double> mus) {
    d.stage_slopes.push_back(slope);
    d.stage_mus.emplace_back(mus.begin(), mus.end());
  };
  d.run = run_gnc(problem, init, cfg, KernelConfig{c}, obs);
  return d;
}

inline int run_demo(const DemoOptions& opt, std::ostream& err) {
  return detail::guarded(err, [&] {
    const detail::Stopwatch clock;
    const auto pts = make_line_mixture(demo_mixture(), opt.points, opt.seed);
    const LineFitProblem problem(pts, opt.sigma);
    const fs::path out(opt.out);
    fs::create_directories(out);

    std::ostringstream points;
    points << "index,x,y,group\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      points << i << ',' << detail::g17(pts[i].x) << ',' << detail::g17(pts[i].y) << ',' << pts[i].group << '\n';
    }
    detail::write_file(out / "points.csv", points.str());

    std::ostringstream stages, mus;
    stages << "schedule,stage,slope\n";
    mus << "schedule,stage,index,mu\n";
    Json summary;
    detail::Manifest m;
    for (ScheduleKind kind : {ScheduleKind::Efficient, ScheduleKind::Baseline}) {
      const DemoRun d = run_demo_schedule(problem, kind, opt.init, opt.c);
      const char* name = to_string(kind);
      stages << name << ",init," << detail::g17(opt.init) << '\n';
      for (std::size_t s = 0; s < d.stage_slopes.size(); ++s) {
        stages << name << ',' << s << ',' << detail::g17(d.stage_slopes[s]) << '\n';
        for (std::size_t i = 0; i < d.stage_mus[s].size(); ++i) {
          mus << name << ',' << s << ',' << i << ',' << detail::g17(d.stage_mus[s][i]) << '\n';
        }
      }
      Json sj;
      sj["final_slope"] = d.run.state;
      sj["outer_iterations"] = d.run.outer_iterations;
      sj["inner_iterations_total"] = d.run.inner_iterations_total;
      sj["stage_slopes"] = d.stage_slopes;
      std::size_t outliers = 0;
      for (auto c : d.run.classification) outliers += c == Classification::Outlier ? 1 : 0;
      sj["classified_outliers"] = outliers;
      summary[name] = sj;
      m.iterations[name] = Json{{"outer", d.run.outer_iterations}, {"inner_total", d.run.inner_iterations_total}};
    }
    detail::write_file(out / "stages.csv", stages.str());
    detail::write_file(out / "mu.csv", mus.str());
    detail::write_file(out / "summary.json", summary.dump(2) + "\n");

    m.command = "demo";
    m.config = {{"demo.points", std::to_string(opt.points)},
                {"demo.init", detail::g17(opt.init)},
                {"demo.sigma", detail::g17(opt.sigma)},
                {"kernel.c", detail::g17(opt.c)}};
    m.seed = opt.seed;
    m.outputs = {"points.csv", "stages.csv", "mu.csv", "summary.json"};
    m.wall_time_s = clock.seconds();
    detail::write_manifest(out, m);
    return static_cast<int>(kOk);
  });
}

// Re-runs the command recorded in a manifest into out_dir and compares every
// listed output byte for byte with the recorded run. Exit 1 on any mismatch.
inline int run_replay(const std::string& manifest_path, const std::string& out_dir, std::ostream& err) {
  return detail::guarded(err, [&]() -> int {
    const Json m = Json::parse(detail::read_file(manifest_path));
    const std::string command = m.at("command").get<std::string>();
    const KeyValues config = detail::key_values_from_json(m.at("config"));
    const Json& in = m.at("inputs");
    int rc = kInputError;
    if (command == "optimize") {
      OptimizeOptions o;
      o.graph = in.at("graph").get<std::string>();
      if (in.contains("labels")) o.labels = in.at("labels").get<std::string>();
      o.out = out_dir;
      o.config = config;
      rc = run_optimize(o, err);
    } else if (command == "corrupt") {
      rc = run_corrupt({in.at("graph").get<std::string>(), out_dir, config}, err);
    } else if (command == "eval") {
      rc = run_eval({in.at("run").get<std::string>(), in.at("labels").get<std::string>(), in.at("gt").get<std::string>(),
                     out_dir},
                    err);
    } else if (command == "demo") {
      DemoOptions o;
      o.out = out_dir;
      o.seed = m.at("seed").get<std::uint64_t>();
      o.points = std::stoul(config.at("demo.points"));
      o.init = std::stod(config.at("demo.init"));
      o.sigma = std::stod(config.at("demo.sigma"));
      o.c = std::stod(config.at("kernel.c"));
      rc = run_demo(o, err);
    } else {
      throw std::runtime_error("replay: unknown command '" + command + "'");
    }
    if (rc != kOk) return rc;

    const fs::path original(m.at("out_dir").get<std::string>());
    int mismatches = 0;
    for (const auto& name : m.at("outputs")) {
      const std::string file = name.get<std::string>();
      if (detail::read_file(original / file) != detail::read_file(fs::path(out_dir) / file)) {
        err << "pgo replay: " << file << " differs\n";
        ++mismatches;
      }
    }
    return mismatches == 0 ? static_cast<int>(kOk) : static_cast<int>(kInputError);
  });
}

}  // namespace pgo::cli
