#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>

#include "lorasim/sim/time.hpp"

namespace lorasim::phy {

struct CollisionParams {
  double capture_threshold_db = 6.0;
  int critical_preamble_symbols = 5;
  double noise_figure_db = 6.0;
  /// Sensitivity in dBm per bandwidth, indexed by sf-7.
  std::map<std::uint32_t, std::array<double, 6>> sensitivity_dbm{
      {125'000, {-123.0, -126.0, -129.0, -132.0, -134.5, -137.0}},
      {250'000, {-120.0, -123.0, -126.0, -129.0, -131.5, -134.0}},
      {500'000, {-117.0, -120.0, -123.0, -126.0, -128.5, -131.0}},
  };

  double sensitivity(int sf, std::uint32_t bw_hz) const;
  void validate() const;
  friend bool operator==(const CollisionParams&, const CollisionParams&) = default;
};

/// A transmission as seen by one receiver.
struct Arrival {
  sim::SimTime start;
  sim::SimTime preamble_end;
  sim::SimTime end;
  double symbol_ticks = 0.0;
  double rssi_dbm = 0.0;
  std::uint32_t frequency_hz = 0;
  int sf = 0;
};

enum class CollisionOutcome { received, lost_preamble, lost_payload };

const char* to_string(CollisionOutcome outcome);

/// Start of the final `critical_symbols` preamble symbols, clamped to the packet start.
sim::SimTime critical_section_start(const Arrival& a, int critical_symbols);

/// Decides whether `candidate` survives `interferers` at one receiver.
///
/// Only co-channel, same-sf interferers matter. The candidate survives iff it is at least
/// `capture_threshold_db` stronger than every such interferer overlapping the span from its
/// critical preamble section to its end. Overlap confined to earlier preamble symbols is harmless.
/// `interferers` must not contain the candidate.
CollisionOutcome resolve_collision(const Arrival& candidate, std::span<const Arrival> interferers,
                                   const CollisionParams& params);

}  // namespace lorasim::phy
