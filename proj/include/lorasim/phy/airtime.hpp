#pragma once

#include <cstddef>

#include "lorasim/phy/types.hpp"

namespace lorasim::phy {

struct Airtime {
  double preamble_s = 0.0;
  double total_s = 0.0;
  int payload_symbols = 0;
};

/// LoRa time on air (Semtech closed form). Throws ArgumentError for payloads above 255 bytes.
Airtime airtime(const RadioConfig& config, std::size_t payload_len);

/// Number of payload symbols, including the 8 fixed header symbols.
int payload_symbol_count(const RadioConfig& config, std::size_t payload_len);

}  // namespace lorasim::phy
