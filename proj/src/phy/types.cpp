#include "lorasim/phy/types.hpp"

#include <cmath>
#include <string>

#include "lorasim/errors.hpp"

namespace lorasim::phy {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

void RadioConfig::validate() const {
  if (sf < 7 || sf > 12) {
    throw ArgumentError("sf must be in 7..12, got " + std::to_string(sf));
  }
  if (bw_hz != 125'000 && bw_hz != 250'000 && bw_hz != 500'000) {
    throw ArgumentError("bw must be 125000, 250000 or 500000 Hz, got " + std::to_string(bw_hz));
  }
  if (cr < 1 || cr > 4) {
    throw ArgumentError("cr must be in 1..4, got " + std::to_string(cr));
  }
  if (preamble_symbols < 1) {
    throw ArgumentError("preamble_symbols must be >= 1");
  }
  if (frequency_hz == 0) {
    throw ArgumentError("frequency must be nonzero");
  }
  if (!std::isfinite(tx_power_dbm)) {
    throw ArgumentError("tx_power_dbm must be finite");
  }
}

RadioConfig RadioConfig::normalized() const {
  RadioConfig out = *this;
  if (bw_hz == 125'000 && sf >= 11) {
    out.ldro = true;
  }
  return out;
}

double RadioConfig::symbol_seconds() const { return std::ldexp(1.0, sf) / static_cast<double>(bw_hz); }

bool config_match(const RadioConfig& tx, const RadioConfig& rx) {
  return tx.frequency_hz == rx.frequency_hz && tx.sf == rx.sf && tx.bw_hz == rx.bw_hz && tx.cr == rx.cr &&
         tx.iq_inverted == rx.iq_inverted;
}

}  // namespace lorasim::phy
