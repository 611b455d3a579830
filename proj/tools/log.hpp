#pragma once

// Stderr diagnostics gated by the ADAFUSE_LOG env var (error|info|debug,
// default info). Stdout stays reserved for machine-readable output.

#include <cstdlib>
#include <iostream>
#include <string>

namespace adafuse::cli {

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ADAFUSE_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v(env);
    if (v == "error") return LogLevel::error;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

inline void log_error(const std::string& msg) {
  std::cerr << "adafuse: error: " << msg << "\n";
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) {
    std::cerr << "adafuse: " << msg << "\n";
  }
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) {
    std::cerr << "adafuse: debug: " << msg << "\n";
  }
}

} // namespace adafuse::cli
