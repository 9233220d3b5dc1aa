// Independent reference models used only by tests. They are deliberately written differently
// from the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lorasim/phy/collision.hpp"
#include "lorasim/phy/types.hpp"

namespace oracle {

/// Time on air in integer microseconds. Symbol times for the supported sf/bw pairs are whole
/// multiples of 4 us, so (preamble + 4.25) symbols is exact in integer arithmetic.
struct AirtimeUs {
  std::uint64_t preamble;
  std::uint64_t total;
};

inline AirtimeUs airtime_us(int sf, std::uint32_t bw, int cr, int preamble, bool explicit_header, bool crc, bool ldro,
                            int payload_len) {
  const std::uint64_t tsym = (std::uint64_t{1} << sf) * 1'000'000ULL / bw;
  const double num = 8.0 * payload_len - 4.0 * sf + 28.0 + (crc ? 16.0 : 0.0) - (explicit_header ? 0.0 : 20.0);
  const double den = 4.0 * (sf - (ldro ? 2 : 0));
  const double extra = std::max(std::ceil(num / den) * (cr + 4), 0.0);
  const auto n_payload = static_cast<std::uint64_t>(8 + extra);
  const std::uint64_t pre = (4ULL * preamble + 17ULL) * tsym / 4ULL;
  return {pre, pre + n_payload * tsym};
}

/// Packet outcome by walking symbol-sized slots from the critical preamble section to the end
/// and reporting where the first corrupted slot lies.
inline lorasim::phy::CollisionOutcome collision_by_slots(const lorasim::phy::Arrival& c,
                                                         const std::vector<lorasim::phy::Arrival>& others,
                                                         double threshold_db, int critical_symbols) {
  using lorasim::phy::CollisionOutcome;
  const auto sym = static_cast<std::uint64_t>(c.symbol_ticks);
  const std::uint64_t crit_len = std::min<std::uint64_t>(sym * critical_symbols, c.preamble_end.ticks - c.start.ticks);
  const std::uint64_t crit = c.preamble_end.ticks - crit_len;
  for (std::uint64_t s = crit; s < c.end.ticks; s += sym) {
    const std::uint64_t e = std::min(s + sym, c.end.ticks);
    for (const auto& o : others) {
      if (o.frequency_hz != c.frequency_hz || o.sf != c.sf) continue;
      if (c.rssi_dbm - o.rssi_dbm >= threshold_db) continue;
      const bool hit = o.start.ticks < e && s < o.end.ticks;
      if (hit) {
        return s < c.preamble_end.ticks ? CollisionOutcome::lost_preamble : CollisionOutcome::lost_payload;
      }
    }
  }
  return CollisionOutcome::received;
}

/// Random overlap scenario of up to `max_packets` transmissions at 1 us ticks.
inline std::vector<lorasim::phy::Arrival> random_overlaps(std::mt19937_64& gen, int max_packets) {
  std::uniform_int_distribution<int> count(1, max_packets);
  std::uniform_int_distribution<int> sf(7, 8);
  std::uniform_int_distribution<int> freq(0, 5);
  std::uniform_int_distribution<std::uint64_t> start(0, 150'000);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_real_distribution<double> rssi(-125.0, -80.0);
  std::vector<lorasim::phy::Arrival> out;
  const int n = count(gen);
  for (int i = 0; i < n; ++i) {
    const int s = sf(gen);
    const auto at = airtime_us(s, 125'000, 1, 8, true, true, false, len(gen));
    lorasim::phy::Arrival a;
    a.start = {start(gen)};
    a.preamble_end = {a.start.ticks + at.preamble};
    a.end = {a.start.ticks + at.total};
    a.symbol_ticks = static_cast<double>((1u << s) * 8);
    a.rssi_dbm = rssi(gen);
    // mostly co-channel so collisions are common
    a.frequency_hz = freq(gen) == 0 ? 868'300'000 : 868'100'000;
    a.sf = s;
    out.push_back(a);
  }
  return out;
}

}  // namespace oracle
