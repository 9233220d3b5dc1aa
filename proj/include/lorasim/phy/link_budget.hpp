#pragma once

#include "lorasim/phy/types.hpp"

namespace lorasim::phy {

/// Log-distance path loss with optional lognormal shadowing.
struct PathLossParams {
  double pl0_db = 127.41;
  double d0_m = 40.0;
  double gamma = 2.08;
  double sigma_db = 0.0;

  void validate() const;
  friend bool operator==(const PathLossParams&, const PathLossParams&) = default;
};

struct LinkBudget {
  double rssi_dbm = 0.0;
  double snr_db = 0.0;
};

double path_loss_db(double distance_m, const PathLossParams& params, double shadow_db = 0.0);

/// Thermal noise floor over `bw_hz` plus the receiver noise figure.
double noise_floor_dbm(std::uint32_t bw_hz, double noise_figure_db);

/// RSSI and SNR of `tx` at `rx_location`. Distances below d0 (including coincident
/// locations) are clamped to d0. `shadow_db` is the caller's shadowing draw.
LinkBudget link_budget(const AirPacket& tx, const Location& rx_location, const PathLossParams& params,
                       double noise_figure_db, double shadow_db = 0.0);

}  // namespace lorasim::phy
