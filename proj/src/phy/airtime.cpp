#include "lorasim/phy/airtime.hpp"

#include <algorithm>
#include <string>

#include "lorasim/errors.hpp"

namespace lorasim::phy {

int payload_symbol_count(const RadioConfig& config, std::size_t payload_len) {
  if (payload_len > 255) {
    throw ArgumentError("payload length " + std::to_string(payload_len) + " exceeds 255 bytes");
  }
  const int pl = static_cast<int>(payload_len);
  const int crc = config.crc_on ? 1 : 0;
  const int implicit = config.explicit_header ? 0 : 1;
  const int de = config.ldro ? 1 : 0;
  const int numerator = 8 * pl - 4 * config.sf + 28 + 16 * crc - 20 * implicit;
  const int denominator = 4 * (config.sf - 2 * de);
  // Ceiling division that also handles negative numerators; clamped at zero below.
  int blocks = numerator > 0 ? (numerator + denominator - 1) / denominator : 0;
  return 8 + std::max(blocks * (config.cr + 4), 0);
}

Airtime airtime(const RadioConfig& config, std::size_t payload_len) {
  const double tsym = config.symbol_seconds();
  Airtime out;
  out.payload_symbols = payload_symbol_count(config, payload_len);
  out.preamble_s = (config.preamble_symbols + 4.25) * tsym;
  out.total_s = out.preamble_s + out.payload_symbols * tsym;
  return out;
}

}  // namespace lorasim::phy
