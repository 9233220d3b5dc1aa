#include "lorasim/phy/link_budget.hpp"

#include <algorithm>
#include <cmath>

#include "lorasim/errors.hpp"

namespace lorasim::phy {

void PathLossParams::validate() const {
  if (!(d0_m > 0.0)) throw ArgumentError("path loss d0 must be > 0");
  if (!(gamma > 0.0)) throw ArgumentError("path loss exponent must be > 0");
  if (!(sigma_db >= 0.0)) throw ArgumentError("shadowing sigma must be >= 0");
  if (!std::isfinite(pl0_db)) throw ArgumentError("pl0 must be finite");
}

double path_loss_db(double distance_m, const PathLossParams& params, double shadow_db) {
  const double d = std::max(distance_m, params.d0_m);
  return params.pl0_db + 10.0 * params.gamma * std::log10(d / params.d0_m) + shadow_db;
}

double noise_floor_dbm(std::uint32_t bw_hz, double noise_figure_db) {
  return -174.0 + 10.0 * std::log10(static_cast<double>(bw_hz)) + noise_figure_db;
}

LinkBudget link_budget(const AirPacket& tx, const Location& rx_location, const PathLossParams& params,
                       double noise_figure_db, double shadow_db) {
  LinkBudget out;
  out.rssi_dbm = tx.config.tx_power_dbm - path_loss_db(distance(tx.tx_location, rx_location), params, shadow_db);
  out.snr_db = out.rssi_dbm - noise_floor_dbm(tx.config.bw_hz, noise_figure_db);
  return out;
}

}  // namespace lorasim::phy
