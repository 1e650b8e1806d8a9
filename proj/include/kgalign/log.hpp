#pragma once

#include <atomic>
#include <cstddef>
#include <string_view>

namespace kgalign {

enum class LogLevel { Debug, Info, Warning, Error };

void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view message);

inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warning(std::string_view m) { log(LogLevel::Warning, m); }

/// Number of warnings emitted so far in this process.
std::size_t warning_count();

}  // namespace kgalign
