#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lorasim/energy/power_consumer.hpp"
#include "lorasim/phy/collision.hpp"
#include "lorasim/phy/link_budget.hpp"
#include "lorasim/phy/types.hpp"
#include "lorasim/sim/queue.hpp"
#include "lorasim/sim/task.hpp"

namespace lorasim::phy {

class PhyLayer;

enum class RadioState { sleep, standby, rx, tx, cad };

const char* to_string(RadioState state);

/// Half-duplex LoRa transceiver attached to the shared medium.
///
/// The operations mirror a transceiver HAL: configure, transmit, receive (single or
/// continuous), channel activity detection, standby and sleep. Power draw follows the state.
class Radio {
 public:
  Radio(PhyLayer& phy, std::string id, Location location, energy::PowerProfile profile = {});
  ~Radio();
  Radio(const Radio&) = delete;
  Radio& operator=(const Radio&) = delete;

  const std::string& id() const { return id_; }
  std::size_t index() const { return index_; }
  const Location& location() const { return location_; }
  void set_location(const Location& location) { location_ = location; }

  const RadioConfig& config() const { return config_; }
  /// Applies a new configuration. Changing it while listening restarts preamble search and
  /// interrupts any reception in progress.
  void configure(const RadioConfig& config);

  /// Concentrator mode: demodulate every spreading factor at once (gateways).
  void set_multi_sf(bool enabled) { multi_sf_ = enabled; }
  bool multi_sf() const { return multi_sf_; }

  RadioState state() const { return state_; }
  bool transmitting() const { return state_ == RadioState::tx; }
  /// True while at least one locked reception has not reached its end.
  bool receiving() const { return active_locks_ > 0; }
  /// Latest end time of the locked receptions in progress.
  sim::SimTime lock_end() const { return lock_end_; }

  /// Sends `payload` with the current configuration and completes at the end of its airtime.
  /// The radio returns to standby afterwards.
  sim::Task<> transmit(std::vector<std::uint8_t> payload);

  /// Waits for the next successfully received packet. With a timeout the search ends at the
  /// deadline unless a reception is locked, in which case it waits for that packet to finish.
  /// Returns nullopt on timeout. The radio listens while waiting and returns to standby
  /// afterwards unless continuous reception is enabled.
  sim::Task<std::optional<Reception>> receive(std::optional<double> timeout_seconds);

  /// Channel activity detection over two symbols. True iff a co-channel, same-sf transmission
  /// above sensitivity is on air during the scan.
  sim::Task<bool> cad();

  /// Continuous reception: delivered packets accumulate in rx_queue().
  void listen();
  void standby();
  void sleep();
  bool continuous() const { return continuous_; }

  sim::SimQueue<Reception>& rx_queue() { return rx_queue_; }

  energy::PowerConsumer& power() { return power_; }
  const energy::PowerConsumer& power() const { return power_; }
  const energy::PowerProfile& power_profile() const { return profile_; }

  const std::vector<ReceptionRecord>& packets_log() const { return log_; }

 private:
  friend class PhyLayer;

  struct InFlight {
    AirPacket packet;
    Arrival arrival;
    LinkBudget link;
    bool matched_at_start = false;
    bool locked = false;
    bool finished = false;
    std::uint64_t lock_epoch = 0;
    sim::TimerId preamble_timer = 0;
    sim::TimerId end_timer = 0;
  };

  // Phase callbacks driven by PhyLayer.
  void on_rx_start(AirPacket packet, const LinkBudget& link);
  void on_preamble_end(std::uint64_t seq);
  void on_rx_end(std::uint64_t seq);

  bool matches(const RadioConfig& tx) const;
  InFlight* find(std::uint64_t seq);
  std::vector<Arrival> interferers_of(const InFlight& f) const;
  void record(const InFlight& f, bool delivered, bool collided, bool preamble_missed, bool interrupted);
  void prune();
  void enter_rx();
  void leave_rx();
  void set_state(RadioState state);

  PhyLayer* phy_;
  std::string id_;
  std::size_t index_ = 0;
  Location location_;
  RadioConfig config_;
  bool multi_sf_ = false;

  RadioState state_ = RadioState::standby;
  bool continuous_ = false;
  sim::SimTime rx_since_;
  std::uint64_t rx_epoch_ = 0;
  int active_locks_ = 0;
  sim::SimTime lock_end_;

  energy::PowerProfile profile_;
  energy::PowerConsumer power_;
  sim::SimQueue<Reception> rx_queue_;
  std::vector<InFlight> in_flight_;
  std::vector<ReceptionRecord> log_;
};

}  // namespace lorasim::phy
