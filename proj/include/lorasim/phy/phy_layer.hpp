#pragma once

#include <cstdint>
#include <vector>

#include "lorasim/phy/collision.hpp"
#include "lorasim/phy/link_budget.hpp"
#include "lorasim/phy/radio.hpp"
#include "lorasim/phy/types.hpp"
#include "lorasim/sim/kernel.hpp"
#include "lorasim/sim/rng.hpp"

namespace lorasim::phy {

/// The shared wireless medium. Radios register on construction. A transmission is fanned
/// out to every other radio in three phases: receive start (immediately), preamble end (lock
/// decision) and receive end (delivery or loss).
class PhyLayer {
 public:
  PhyLayer(sim::Kernel& kernel, PathLossParams path_loss = {}, CollisionParams collision = {});
  PhyLayer(const PhyLayer&) = delete;
  PhyLayer& operator=(const PhyLayer&) = delete;

  sim::Kernel& kernel() { return *kernel_; }
  const PathLossParams& path_loss() const { return path_loss_; }
  const CollisionParams& collision() const { return collision_; }

  const std::vector<Radio*>& radios() const { return radios_; }
  /// Every registered radio ever seen, including ones since destroyed, by registration index.
  std::size_t radio_count() const { return next_index_; }

  /// One row per transmitted packet.
  const std::vector<PacketRecord>& packets_log() const { return packets_log_; }

  /// Puts `payload` on air from `sender` and schedules the per-receiver phases.
  AirPacket begin_transmission(Radio& sender, std::vector<std::uint8_t> payload);

 private:
  friend class Radio;
  std::size_t attach(Radio* radio);
  void detach(Radio* radio);

  sim::Kernel* kernel_;
  PathLossParams path_loss_;
  CollisionParams collision_;
  sim::Rng shadowing_;
  std::vector<Radio*> radios_;
  std::size_t next_index_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<PacketRecord> packets_log_;
};

}  // namespace lorasim::phy
