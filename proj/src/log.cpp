#include "kgalign/log.hpp"

#include <cstdio>
#include <mutex>

namespace kgalign {

namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::Info)};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

void log(LogLevel level, std::string_view message) {
  if (level == LogLevel::Warning) ++g_warnings;
  if (static_cast<int>(level) < g_level) return;
  static constexpr const char* kNames[] = {"debug", "info", "warning", "error"};
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[kgalign %s] %.*s\n", kNames[static_cast<int>(level)], static_cast<int>(message.size()),
               message.data());
}

std::size_t warning_count() { return g_warnings; }

}  // namespace kgalign
