#pragma once

// Diagnostics go through a single spdlog logger writing to stderr. The level is
// taken from the PGO_LOG environment variable (trace, debug, info, warn, error,
// critical, off); the default is warn.

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace pgo {

inline spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto lg = spdlog::stderr_color_mt("pgo");
    lg->set_pattern("[%n] [%l] %v");
    lg->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("PGO_LOG"); env != nullptr && *env != '\0') {
      lg->set_level(spdlog::level::from_str(env));
    }
    return lg;
  }();
  return *instance;
}

}  // namespace pgo
