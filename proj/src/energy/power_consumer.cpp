#include "lorasim/energy/power_consumer.hpp"

#include <cmath>
#include <iterator>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"

namespace lorasim::energy {

double PowerProfile::tx_power_w(double dbm) const {
  if (tx_w.empty()) {
    throw StateError("power profile has no tx entries");
  }
  auto hi = tx_w.lower_bound(dbm);
  if (hi == tx_w.end()) {
    return std::prev(hi)->second;
  }
  if (hi->first == dbm || hi == tx_w.begin()) {
    return hi->second;
  }
  auto lo = std::prev(hi);
  double f = (dbm - lo->first) / (hi->first - lo->first);
  return lo->second + f * (hi->second - lo->second);
}

void PowerProfile::validate() const {
  if (sleep_w < 0 || standby_w < 0 || rx_w < 0) {
    throw ArgumentError("power profile values must be >= 0");
  }
  for (const auto& [dbm, w] : tx_w) {
    if (w < 0 || !std::isfinite(dbm)) {
      throw ArgumentError("power profile tx entries must be finite and >= 0");
    }
  }
}

PowerConsumer::PowerConsumer(sim::Kernel& kernel, std::string id, double initial_power_w)
    : kernel_(&kernel), id_(std::move(id)), last_(kernel.now()) {
  set_power(initial_power_w);
}

const PowerEvent& PowerConsumer::set_power(double power_w) {
  if (!(power_w >= 0.0) || !std::isfinite(power_w)) {
    throw ArgumentError("power draw must be a finite value >= 0");
  }
  auto now = kernel_->now();
  cumulative_j_ += power_w_ * kernel_->to_seconds(sim::SimTime{now.ticks - last_.ticks});
  last_ = now;
  power_w_ = power_w;
  events_.push_back(PowerEvent{now, power_w, cumulative_j_});
  log::get("energy")->trace("{} -> {} W at {:.9g} s, {} J", id_, power_w, kernel_->now_seconds(), cumulative_j_);
  return events_.back();
}

double PowerConsumer::total_energy() const {
  auto now = kernel_->now();
  return cumulative_j_ + power_w_ * kernel_->to_seconds(sim::SimTime{now.ticks - last_.ticks});
}

}  // namespace lorasim::energy
