#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lorasim/phy/phy_layer.hpp"
#include "lorasim/phy/radio.hpp"
#include "lorasim/sim/kernel.hpp"

namespace lorasim::lorawan {

class NetworkServer;

struct GatewayConfig {
  /// Channel the gateway listens on. The gateway demodulates all spreading factors.
  phy::RadioConfig uplink_channel{};
  energy::PowerProfile power{};
};

/// Multi-SF concentrator that forwards every received frame to its network server and
/// transmits downlinks at times the server reserves.
class Gateway {
 public:
  Gateway(phy::PhyLayer& phy, std::string id, phy::Location location, NetworkServer& ns, GatewayConfig config = {});
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  const std::string& id() const { return radio_.id(); }
  phy::Radio& radio() { return radio_; }
  const phy::Radio& radio() const { return radio_; }

  /// Earliest start at or after `from` for a transmission lasting `duration` ticks.
  sim::SimTime next_free(sim::SimTime from, std::uint64_t duration) const;
  bool is_free(sim::SimTime start, std::uint64_t duration) const;
  /// Reserves [at, at + airtime) and transmits `wire` with `cfg` then. Throws StateError
  /// when the slot overlaps an existing reservation.
  void schedule_downlink(sim::SimTime at, const phy::RadioConfig& cfg, std::vector<std::uint8_t> wire);

  std::uint64_t frames_forwarded() const { return forwarded_; }
  std::uint64_t downlinks_sent() const { return sent_; }

 private:
  sim::Task<> pump();
  sim::Task<> send(sim::SimTime at, phy::RadioConfig cfg, std::vector<std::uint8_t> wire);
  void resume_listening();

  sim::Kernel* kernel_;
  NetworkServer* ns_;
  GatewayConfig config_;
  phy::Radio radio_;
  std::vector<std::pair<sim::SimTime, sim::SimTime>> reservations_;
  sim::TaskHandle pump_task_;
  std::uint64_t forwarded_ = 0;
  std::uint64_t sent_ = 0;
};

}  // namespace lorasim::lorawan
