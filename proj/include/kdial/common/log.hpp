#pragma once

#include <string_view>

namespace kdial::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kSilent = 4 };

void set_level(Level level);
Level level();

void debug(std::string_view message);
void info(std::string_view message);
void warning(std::string_view message);
void error(std::string_view message);

// Number of warnings emitted since process start (including suppressed ones).
std::size_t warning_count();

}  // namespace kdial::log
