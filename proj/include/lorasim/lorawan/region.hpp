#pragma once

#include <cstdint>

#include "lorasim/phy/types.hpp"

namespace lorasim::lorawan {

struct RxWindowParams {
  double rx1_delay_s = 1.0;
  double rx2_delay_s = 2.0;
  std::uint32_t rx2_frequency_hz = 869'525'000;
  int rx2_sf = 12;
  double join_accept_delay1_s = 5.0;
  double join_accept_delay2_s = 6.0;

  void validate() const;
  friend bool operator==(const RxWindowParams&, const RxWindowParams&) = default;
};

// EU868 data rates DR0..DR5 map to sf12..sf7 at 125 kHz.
int dr_to_sf(int dr);
int sf_to_dr(int sf);

// TXPower index i means max EIRP (16 dBm) minus 2i dB; indices 0..7.
double tx_power_index_to_dbm(int index);
int dbm_to_tx_power_index(double dbm);

/// SNR at which demodulation fails for the spreading factor.
double demodulation_floor_db(int sf);
/// LinkCheckAns margin: dB above the floor, rounded and clamped to 0..254.
std::uint8_t link_margin(double snr_db, int sf);
/// DevStatusAns margin: SNR rounded and clamped to -32..31.
std::int8_t status_margin(double snr_db);

/// RX1 for a given uplink: same channel and spreading factor, inverted IQ.
phy::RadioConfig rx1_config(const phy::RadioConfig& uplink);
phy::RadioConfig rx2_config(const RxWindowParams& params, double tx_power_dbm = 14.0);

/// Listening time of a receive window: long enough to detect a preamble that starts at
/// window opening.
double rx_window_seconds(const phy::RadioConfig& cfg);

}  // namespace lorasim::lorawan
