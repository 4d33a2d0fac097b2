#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace admpo {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Log level comes from ADMPO_LOG_LEVEL (error|info|debug), default info.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("ADMPO_LOG_LEVEL");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "error") return LogLevel::kError;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::kInfo) {
    std::fprintf(stderr, "[info] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::kDebug) {
    std::fprintf(stderr, "[debug] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_error(const char* fmt, Args... args) {
  std::fprintf(stderr, "[error] ");
  std::fprintf(stderr, fmt, args...);
  std::fprintf(stderr, "\n");
}

}  // namespace admpo
