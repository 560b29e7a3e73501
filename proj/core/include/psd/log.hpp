#pragma once

#include <cstdio>

namespace psd {

enum class LogLevel {
    debug = 0,
    info  = 1,
    warn  = 2,
    error = 3,
};

/// Level comes from the PSD_LOG environment variable (debug|info|warn|error),
/// defaulting to info. Output goes to stderr.
LogLevel log_level();
void set_log_level(LogLevel level);
bool log_enabled(LogLevel level);
void log_line(LogLevel level, const char * fmt, ...);

}  // namespace psd

#define PSD_LOG_DEBUG(...) ::psd::log_line(::psd::LogLevel::debug, __VA_ARGS__)
#define PSD_LOG_INFO(...)  ::psd::log_line(::psd::LogLevel::info, __VA_ARGS__)
#define PSD_LOG_WARN(...)  ::psd::log_line(::psd::LogLevel::warn, __VA_ARGS__)
#define PSD_LOG_ERROR(...) ::psd::log_line(::psd::LogLevel::error, __VA_ARGS__)
