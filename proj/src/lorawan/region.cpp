#include "lorasim/lorawan/region.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lorasim/errors.hpp"

namespace lorasim::lorawan {

void RxWindowParams::validate() const {
  if (!(rx1_delay_s > 0) || !(rx2_delay_s > rx1_delay_s)) {
    throw ArgumentError("receive delays must satisfy 0 < rx1_delay < rx2_delay");
  }
  if (!(join_accept_delay1_s > 0) || !(join_accept_delay2_s > join_accept_delay1_s)) {
    throw ArgumentError("join accept delays must satisfy 0 < delay1 < delay2");
  }
  if (rx2_sf < 7 || rx2_sf > 12) {
    throw ArgumentError("rx2 spreading factor must be 7..12");
  }
}

int dr_to_sf(int dr) {
  if (dr < 0 || dr > 5) throw ArgumentError("data rate " + std::to_string(dr) + " outside DR0..DR5");
  return 12 - dr;
}

int sf_to_dr(int sf) {
  if (sf < 7 || sf > 12) throw ArgumentError("spreading factor " + std::to_string(sf) + " outside 7..12");
  return 12 - sf;
}

double tx_power_index_to_dbm(int index) {
  if (index < 0 || index > 7) throw ArgumentError("TX power index " + std::to_string(index) + " outside 0..7");
  return 16.0 - 2.0 * index;
}

int dbm_to_tx_power_index(double dbm) {
  return std::clamp(static_cast<int>(std::lround((16.0 - dbm) / 2.0)), 0, 7);
}

double demodulation_floor_db(int sf) {
  static constexpr double floor[] = {-7.5, -10.0, -12.5, -15.0, -17.5, -20.0};
  if (sf < 7 || sf > 12) throw ArgumentError("spreading factor " + std::to_string(sf) + " outside 7..12");
  return floor[sf - 7];
}

std::uint8_t link_margin(double snr_db, int sf) {
  const double m = std::round(snr_db - demodulation_floor_db(sf));
  return static_cast<std::uint8_t>(std::clamp(m, 0.0, 254.0));
}

std::int8_t status_margin(double snr_db) {
  return static_cast<std::int8_t>(std::clamp(std::round(snr_db), -32.0, 31.0));
}

phy::RadioConfig rx1_config(const phy::RadioConfig& uplink) {
  phy::RadioConfig c = uplink;
  c.iq_inverted = true;
  return c.normalized();
}

phy::RadioConfig rx2_config(const RxWindowParams& params, double tx_power_dbm) {
  phy::RadioConfig c;
  c.frequency_hz = params.rx2_frequency_hz;
  c.sf = params.rx2_sf;
  c.iq_inverted = true;
  c.tx_power_dbm = tx_power_dbm;
  return c.normalized();
}

double rx_window_seconds(const phy::RadioConfig& cfg) { return (cfg.preamble_symbols + 8) * cfg.symbol_seconds(); }

}  // namespace lorasim::lorawan
