#pragma once

#include <compare>
#include <cstdint>

namespace lorasim::sim {

/// Virtual clock position, counted in kernel ticks since t=0.
struct SimTime {
  std::uint64_t ticks = 0;

  friend constexpr auto operator<=>(SimTime, SimTime) = default;

  constexpr SimTime operator+(std::uint64_t delta) const { return SimTime{ticks + delta}; }
};

struct SimConfig {
  double tick_duration = 1e-6;  // seconds per tick
  std::uint64_t seed = 0;
  double length = 0.0;  // seconds; used by callers that drive run() from a config

  void validate() const;
};

}  // namespace lorasim::sim
