#pragma once

#include <cstdio>

namespace atoc {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from the ATOC_LOG_LEVEL environment variable
// (error|warn|info|debug), default info.
LogLevel log_level();

bool log_enabled(LogLevel level);

void log_message(LogLevel level, const char* fmt, ...);

#define ATOC_LOG_ERROR(...) ::atoc::log_message(::atoc::LogLevel::Error, __VA_ARGS__)
#define ATOC_LOG_WARN(...) ::atoc::log_message(::atoc::LogLevel::Warn, __VA_ARGS__)
#define ATOC_LOG_INFO(...) ::atoc::log_message(::atoc::LogLevel::Info, __VA_ARGS__)
#define ATOC_LOG_DEBUG(...) ::atoc::log_message(::atoc::LogLevel::Debug, __VA_ARGS__)

}  // namespace atoc
