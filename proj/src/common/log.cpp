#include "lorasim/log.hpp"

#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lorasim/errors.hpp"

namespace lorasim::log {

std::shared_ptr<spdlog::logger> get(const std::string& module) {
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  if (auto existing = spdlog::get(module)) {
    return existing;
  }
  auto logger = spdlog::stderr_color_mt(module);
  logger->set_level(spdlog::level::warn);
  logger->set_pattern("[%n] %^%l%$: %v");
  return logger;
}

void set_level(const std::string& module, std::string_view level) {
  auto parsed = spdlog::level::from_str(std::string(level));
  // from_str maps unknown names to "off"; only accept "off" when spelled out.
  if (parsed == spdlog::level::off && level != "off") {
    throw ArgumentError("unknown log level '" + std::string(level) + "'");
  }
  get(module)->set_level(parsed);
}

void apply_spec(std::string_view spec) {
  auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ArgumentError("log level must look like MODULE=LEVEL, got '" + std::string(spec) + "'");
  }
  set_level(std::string(spec.substr(0, eq)), spec.substr(eq + 1));
}

}  // namespace lorasim::log
