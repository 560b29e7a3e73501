#include "psd/log.hpp"

#include <cstdarg>
#include <cstdlib>
#include <cstring>

namespace psd {

namespace {

LogLevel g_level = [] {
    const char * env = std::getenv("PSD_LOG");
    if (env == nullptr) return LogLevel::info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    return LogLevel::info;
}();

const char * level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::debug: return "debug";
        case LogLevel::info:  return "info";
        case LogLevel::warn:  return "warn";
        case LogLevel::error: return "error";
    }
    return "?";
}

}  // namespace

LogLevel log_level() { return g_level; }
void set_log_level(LogLevel level) { g_level = level; }
bool log_enabled(LogLevel level) { return static_cast<int>(level) >= static_cast<int>(g_level); }

void log_line(LogLevel level, const char * fmt, ...) {
    if (!log_enabled(level)) return;
    std::fprintf(stderr, "[psd %s] ", level_tag(level));
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

}  // namespace psd
