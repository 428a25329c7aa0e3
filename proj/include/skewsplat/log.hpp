#pragma once

// Tiny leveled logger on stderr. SKEWSPLAT_LOG=error|warn|info|debug (default warn).

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace skewsplat::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level level_from_env() {
  const char* v = std::getenv("SKEWSPLAT_LOG");
  if (!v) return Level::warn;
  if (!std::strcmp(v, "error")) return Level::error;
  if (!std::strcmp(v, "info")) return Level::info;
  if (!std::strcmp(v, "debug")) return Level::debug;
  return Level::warn;
}

inline Level& current() {
  static Level lvl = level_from_env();
  return lvl;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(current()); }

inline void write(Level l, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (enabled(l)) std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(l)], msg.c_str());
}

inline void error(const std::string& m) { write(Level::error, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void debug(const std::string& m) { write(Level::debug, m); }

}  // namespace skewsplat::log
