#pragma once

#include <map>
#include <string>
#include <vector>

#include "lorasim/sim/kernel.hpp"

namespace lorasim::energy {

struct PowerEvent {
  sim::SimTime time;
  double power_w = 0.0;
  double cumulative_j = 0.0;  // energy consumed before this transition
};

/// Radio draw per state. Values default to a typical sub-GHz transceiver.
struct PowerProfile {
  double sleep_w = 1.5e-6;
  double standby_w = 1.6e-3;
  double rx_w = 14.4e-3;
  std::map<double, double> tx_w{{14.0, 0.120}};  // keyed by tx power in dBm

  /// Draw at `dbm`: exact entry, else linear interpolation, clamped to the table ends.
  double tx_power_w(double dbm) const;
  void validate() const;
};

/// Integrates a piecewise-constant power draw over virtual time.
class PowerConsumer {
 public:
  PowerConsumer(sim::Kernel& kernel, std::string id, double initial_power_w = 0.0);

  const std::string& id() const { return id_; }
  double power() const { return power_w_; }

  /// Records a transition; repeated wattages are still recorded.
  const PowerEvent& set_power(double power_w);
  /// Energy through now(), including the interval since the last transition.
  double total_energy() const;

  const std::vector<PowerEvent>& events() const { return events_; }

 private:
  sim::Kernel* kernel_;
  std::string id_;
  double power_w_ = 0.0;
  double cumulative_j_ = 0.0;
  sim::SimTime last_;
  std::vector<PowerEvent> events_;
};

}  // namespace lorasim::energy
