#include "coverage_inekf/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <mutex>
#include <string>

namespace coverage_inekf::log {

namespace {
std::once_flag g_init;
}

void set_level(std::string_view level) {
  spdlog::set_level(spdlog::level::from_str(std::string(level)));
}

void init_from_env() {
  std::call_once(g_init, [] {
    // Diagnostics go to stderr so CSV written to stdout stays clean.
    spdlog::set_default_logger(spdlog::stderr_color_mt("coverage_inekf"));
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("COVERAGE_INEKF_LOG");
    set_level(env != nullptr ? env : "warn");
  });
}

}  // namespace coverage_inekf::log
