#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <spdlog/logger.h>

namespace lorasim::log {

/// Per-module logger ("kernel", "phy", "energy", "lorawan", "firmware", "cli").
/// Loggers write to stderr and default to the warn level.
std::shared_ptr<spdlog::logger> get(const std::string& module);

/// Sets the level of one module's logger. Throws ArgumentError on an unknown level name.
void set_level(const std::string& module, std::string_view level);

/// Parses "MODULE=LEVEL" and applies it.
void apply_spec(std::string_view spec);

}  // namespace lorasim::log
