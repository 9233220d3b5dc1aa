#include "lorasim/phy/collision.hpp"

#include <cmath>
#include <string>

#include "lorasim/errors.hpp"

namespace lorasim::phy {

double CollisionParams::sensitivity(int sf, std::uint32_t bw_hz) const {
  auto it = sensitivity_dbm.find(bw_hz);
  if (it == sensitivity_dbm.end() || sf < 7 || sf > 12) {
    throw ArgumentError("no sensitivity entry for sf" + std::to_string(sf) + "/" + std::to_string(bw_hz) + " Hz");
  }
  return it->second[static_cast<std::size_t>(sf - 7)];
}

void CollisionParams::validate() const {
  if (!(capture_threshold_db >= 0.0)) throw ArgumentError("capture threshold must be >= 0 dB");
  if (critical_preamble_symbols < 0) throw ArgumentError("critical preamble symbols must be >= 0");
  for (std::uint32_t bw : {125'000U, 250'000U, 500'000U}) {
    if (!sensitivity_dbm.contains(bw)) {
      throw ArgumentError("sensitivity table lacks bandwidth " + std::to_string(bw));
    }
  }
}

const char* to_string(CollisionOutcome outcome) {
  switch (outcome) {
    case CollisionOutcome::received:
      return "received";
    case CollisionOutcome::lost_preamble:
      return "lost_preamble";
    case CollisionOutcome::lost_payload:
      return "lost_payload";
  }
  return "?";
}

sim::SimTime critical_section_start(const Arrival& a, int critical_symbols) {
  auto span = static_cast<std::uint64_t>(std::llround(critical_symbols * a.symbol_ticks));
  const std::uint64_t preamble = a.preamble_end.ticks - a.start.ticks;
  return sim::SimTime{a.preamble_end.ticks - std::min(span, preamble)};
}

namespace {

bool overlaps(sim::SimTime a0, sim::SimTime a1, sim::SimTime b0, sim::SimTime b1) { return a0 < b1 && b0 < a1; }

}  // namespace

CollisionOutcome resolve_collision(const Arrival& candidate, std::span<const Arrival> interferers,
                                   const CollisionParams& params) {
  const auto critical = critical_section_start(candidate, params.critical_preamble_symbols);
  bool payload_hit = false;
  for (const auto& other : interferers) {
    if (other.frequency_hz != candidate.frequency_hz || other.sf != candidate.sf) {
      continue;
    }
    if (candidate.rssi_dbm - other.rssi_dbm >= params.capture_threshold_db) {
      continue;
    }
    if (overlaps(critical, candidate.preamble_end, other.start, other.end)) {
      return CollisionOutcome::lost_preamble;
    }
    if (overlaps(candidate.preamble_end, candidate.end, other.start, other.end)) {
      payload_hit = true;
    }
  }
  return payload_hit ? CollisionOutcome::lost_payload : CollisionOutcome::received;
}

}  // namespace lorasim::phy
