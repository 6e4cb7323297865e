#pragma once

// Flat "key = value" configuration files. Lines starting with '#' are
// comments. Recognized keys:
//
//   kernel.c, kernel.mu_tol, kernel.d2_tol, kernel.max_bisect_iters
//   solver.max_inner_iters, solver.rel_cost_tol, solver.abs_grad_tol,
//   solver.lm_lambda_init, solver.lm_lambda_factor, solver.schedule
//   (efficient|baseline), solver.robust_on_odometry (true|false),
//   solver.init (file|odometry)
//   corrupt.seed, corrupt.mode (false_loops|noisy_perturbation),
//   corrupt.outlier_ratio, corrupt.odom_sigma, corrupt.loop_sigma
//   (space-separated lists), corrupt.min_id_gap

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "pgo/corrupt.hpp"
#include "pgo/errors.hpp"
#include "pgo/kernel.hpp"
#include "pgo/solver.hpp"

namespace pgo {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_value(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw DomainError("config: bad value for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw DomainError("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) out.push_back(parse_value<double>(key, tok));
  return out;
}

inline std::string g17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError(line_no, "empty key");
    kv[key] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

inline KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

enum class InitMode { File, Odometry };

struct RunConfig {
  KernelConfig kernel;
  SolverConfig solver;
  InitMode init = InitMode::File;
};

// Unknown keys within a recognized section are an error; keys of other
// sections are ignored so one file can carry every section.
inline RunConfig run_config_from(const KeyValues& kv) {
  using detail::parse_value;
  RunConfig rc;
  for (const auto& [key, v] : kv) {
    if (key == "kernel.c") {
      rc.kernel.c = parse_value<double>(key, v);
    } else if (key == "kernel.mu_tol") {
      rc.kernel.mu_tol = parse_value<double>(key, v);
    } else if (key == "kernel.d2_tol") {
      rc.kernel.d2_tol = parse_value<double>(key, v);
    } else if (key == "kernel.max_bisect_iters") {
      rc.kernel.max_bisect_iters = parse_value<int>(key, v);
    } else if (key == "solver.max_inner_iters") {
      rc.solver.max_inner_iters = parse_value<int>(key, v);
    } else if (key == "solver.rel_cost_tol") {
      rc.solver.rel_cost_tol = parse_value<double>(key, v);
    } else if (key == "solver.abs_grad_tol") {
      rc.solver.abs_grad_tol = parse_value<double>(key, v);
    } else if (key == "solver.lm_lambda_init") {
      rc.solver.lm_lambda_init = parse_value<double>(key, v);
    } else if (key == "solver.lm_lambda_factor") {
      rc.solver.lm_lambda_factor = parse_value<double>(key, v);
    } else if (key == "solver.schedule") {
      if (v == "efficient") {
        rc.solver.schedule_kind = ScheduleKind::Efficient;
      } else if (v == "baseline") {
        rc.solver.schedule_kind = ScheduleKind::Baseline;
      } else {
        throw DomainError("config: solver.schedule must be efficient or baseline");
      }
    } else if (key == "solver.robust_on_odometry") {
      rc.solver.robust_on_odometry = detail::parse_bool(key, v);
    } else if (key == "solver.init") {
      if (v == "file") {
        rc.init = InitMode::File;
      } else if (v == "odometry") {
        rc.init = InitMode::Odometry;
      } else {
        throw DomainError("config: solver.init must be file or odometry");
      }
    } else if (key.starts_with("kernel.") || key.starts_with("solver.")) {
      throw DomainError("config: unknown key " + key);
    }
  }
  rc.kernel.validate();
  rc.solver.validate();
  return rc;
}

inline KeyValues to_key_values(const RunConfig& rc) {
  using detail::g17;
  KeyValues kv;
  kv["kernel.c"] = g17(rc.kernel.c);
  kv["kernel.mu_tol"] = g17(rc.kernel.mu_tol);
  kv["kernel.d2_tol"] = g17(rc.kernel.d2_tol);
  kv["kernel.max_bisect_iters"] = std::to_string(rc.kernel.max_bisect_iters);
  kv["solver.max_inner_iters"] = std::to_string(rc.solver.max_inner_iters);
  kv["solver.rel_cost_tol"] = g17(rc.solver.rel_cost_tol);
  kv["solver.abs_grad_tol"] = g17(rc.solver.abs_grad_tol);
  kv["solver.lm_lambda_init"] = g17(rc.solver.lm_lambda_init);
  kv["solver.lm_lambda_factor"] = g17(rc.solver.lm_lambda_factor);
  kv["solver.schedule"] = to_string(rc.solver.schedule_kind);
  kv["solver.robust_on_odometry"] = rc.solver.robust_on_odometry ? "true" : "false";
  kv["solver.init"] = rc.init == InitMode::File ? "file" : "odometry";
  return kv;
}

inline CorruptionSpec corruption_spec_from(const KeyValues& kv) {
  using detail::parse_value;
  CorruptionSpec spec;
  for (const auto& [key, v] : kv) {
    if (key == "corrupt.seed") {
      spec.seed = parse_value<std::uint64_t>(key, v);
    } else if (key == "corrupt.mode") {
      if (v == "false_loops") {
        spec.mode = CorruptionMode::FalseLoops;
      } else if (v == "noisy_perturbation") {
        spec.mode = CorruptionMode::NoisyPerturbation;
      } else {
        throw DomainError("config: corrupt.mode must be false_loops or noisy_perturbation");
      }
    } else if (key == "corrupt.outlier_ratio") {
      spec.outlier_ratio = parse_value<double>(key, v);
    } else if (key == "corrupt.odom_sigma") {
      spec.odom_sigma = detail::parse_list(key, v);
    } else if (key == "corrupt.loop_sigma") {
      spec.loop_sigma = detail::parse_list(key, v);
    } else if (key == "corrupt.min_id_gap") {
      spec.min_id_gap = parse_value<int>(key, v);
    } else if (key.starts_with("corrupt.")) {
      throw DomainError("config: unknown key " + key);
    }
  }
  spec.validate();
  return spec;
}

inline KeyValues to_key_values(const CorruptionSpec& spec) {
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + detail::g17(v[i]);
    return s;
  };
  KeyValues kv;
  kv["corrupt.seed"] = std::to_string(spec.seed);
  kv["corrupt.mode"] = to_string(spec.mode);
  kv["corrupt.outlier_ratio"] = detail::g17(spec.outlier_ratio);
  kv["corrupt.min_id_gap"] = std::to_string(spec.min_id_gap);
  if (!spec.odom_sigma.empty()) kv["corrupt.odom_sigma"] = list(spec.odom_sigma);
  if (!spec.loop_sigma.empty()) kv["corrupt.loop_sigma"] = list(spec.loop_sigma);
  return kv;
}

}  // namespace pgo
