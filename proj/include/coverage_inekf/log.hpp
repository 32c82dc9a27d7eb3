#pragma once

#include <spdlog/spdlog.h>

#include <string_view>

// Thin logging facade. Verbosity comes from the COVERAGE_INEKF_LOG environment
// variable (trace, debug, info, warn, error, off); default is warn.
namespace coverage_inekf::log {

/// Applies COVERAGE_INEKF_LOG once; later calls are no-ops.
void init_from_env();

void set_level(std::string_view level);

template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  init_from_env();
  spdlog::debug(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  init_from_env();
  spdlog::info(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  init_from_env();
  spdlog::warn(fmt, std::forward<Args>(args)...);
}

template <typename... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  init_from_env();
  spdlog::error(fmt, std::forward<Args>(args)...);
}

}  // namespace coverage_inekf::log
