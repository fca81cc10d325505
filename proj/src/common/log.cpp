#include "kdial/common/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace kdial::log {
namespace {

std::atomic<Level> g_level{Level::kWarning};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;

void emit(Level lvl, const char* tag, std::string_view message) {
  if (lvl < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[kdial " << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level lvl) { g_level.store(lvl); }
Level level() { return g_level.load(); }

void debug(std::string_view message) { emit(Level::kDebug, "debug", message); }
void info(std::string_view message) { emit(Level::kInfo, "info", message); }
void warning(std::string_view message) {
  ++g_warnings;
  emit(Level::kWarning, "warning", message);
}
void error(std::string_view message) { emit(Level::kError, "error", message); }

std::size_t warning_count() { return g_warnings.load(); }

}  // namespace kdial::log
