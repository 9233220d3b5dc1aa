#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lorasim/sim/time.hpp"

namespace lorasim::phy {

struct Location {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

/// Transmit/receive parameters of a LoRa radio.
struct RadioConfig {
  std::uint32_t frequency_hz = 868'100'000;
  int sf = 7;
  std::uint32_t bw_hz = 125'000;
  int cr = 1;  // coding rate 4/(4+cr)
  int preamble_symbols = 8;
  bool iq_inverted = false;
  bool explicit_header = true;
  bool crc_on = true;
  bool ldro = false;
  double tx_power_dbm = 14.0;

  /// Throws ArgumentError when a field lies outside its allowed set.
  void validate() const;
  /// Copy with low-data-rate optimisation forced on where the symbol time requires it
  /// (sf11/sf12 at 125 kHz).
  RadioConfig normalized() const;

  double symbol_seconds() const;

  friend bool operator==(const RadioConfig&, const RadioConfig&) = default;
};

/// True when a receiver tuned to `rx` can demodulate a transmission sent with `tx`:
/// same frequency, spreading factor, bandwidth, coding rate and IQ polarity.
bool config_match(const RadioConfig& tx, const RadioConfig& rx);

/// A transmission in flight. Every receiver gets its own copy.
struct AirPacket {
  std::uint64_t seq = 0;  // unique per run, in transmission order
  std::vector<std::uint8_t> payload;
  RadioConfig config;
  sim::SimTime tx_start;
  sim::SimTime preamble_end;
  sim::SimTime rx_end;
  Location tx_location;
  std::string sender_id;
};

/// Per-receiver outcome of one transmission.
struct Reception {
  AirPacket packet;
  double rssi_dbm = 0.0;
  double snr_db = 0.0;
  bool collided = false;
  bool preamble_missed = false;
  bool interrupted = false;
};

/// Row of the medium-wide packet log.
struct PacketRecord {
  std::uint64_t seq = 0;
  sim::SimTime time;
  std::string sender_id;
  std::uint32_t frequency_hz = 0;
  int sf = 0;
  std::uint32_t bw_hz = 0;
  int cr = 0;
  int preamble_symbols = 0;
  double airtime_s = 0.0;
  double tx_power_dbm = 0.0;
  Location tx_location;
  std::vector<std::uint8_t> payload;
};

/// Row of a radio's reception log. `time` is the packet's transmission start.
struct ReceptionRecord {
  std::uint64_t packet_seq = 0;
  std::size_t radio_index = 0;
  sim::SimTime time;
  std::string radio_id;
  std::string sender_id;
  double rssi_dbm = 0.0;
  double snr_db = 0.0;
  bool delivered = false;
  bool collided = false;
  bool preamble_missed = false;
  bool interrupted = false;
};

}  // namespace lorasim::phy
