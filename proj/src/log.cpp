#include "atoc/log.hpp"

#include <cstdarg>
#include <cstdlib>
#include <cstring>

namespace atoc {

static LogLevel parse_level() {
  const char* env = std::getenv("ATOC_LOG_LEVEL");
  if (env == nullptr) return LogLevel::Info;
  if (std::strcmp(env, "error") == 0) return LogLevel::Error;
  if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
  if (std::strcmp(env, "info") == 0) return LogLevel::Info;
  if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
  return LogLevel::Info;
}

LogLevel log_level() {
  static LogLevel level = parse_level();
  return level;
}

bool log_enabled(LogLevel level) {
  return static_cast<int>(level) <= static_cast<int>(log_level());
}

void log_message(LogLevel level, const char* fmt, ...) {
  if (!log_enabled(level)) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] ", names[static_cast<int>(level)]);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

}  // namespace atoc
