#include "lorasim/phy/phy_layer.hpp"

#include <algorithm>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"
#include "lorasim/phy/airtime.hpp"

namespace lorasim::phy {

PhyLayer::PhyLayer(sim::Kernel& kernel, PathLossParams path_loss, CollisionParams collision)
    : kernel_(&kernel),
      path_loss_(path_loss),
      collision_(std::move(collision)),
      shadowing_(kernel.rng_stream("phy.shadowing")) {
  path_loss_.validate();
  collision_.validate();
}

std::size_t PhyLayer::attach(Radio* radio) {
  for (const Radio* r : radios_) {
    if (r->id() == radio->id()) {
      throw ArgumentError("radio id '" + radio->id() + "' is already registered");
    }
  }
  radios_.push_back(radio);
  return next_index_++;
}

void PhyLayer::detach(Radio* radio) { std::erase(radios_, radio); }

AirPacket PhyLayer::begin_transmission(Radio& sender, std::vector<std::uint8_t> payload) {
  const RadioConfig cfg = sender.config();
  const Airtime air = airtime(cfg, payload.size());
  const sim::SimTime start = kernel_->now();

  AirPacket packet;
  packet.seq = next_seq_++;
  packet.payload = std::move(payload);
  packet.config = cfg;
  packet.tx_start = start;
  packet.preamble_end = start + kernel_->to_ticks(air.preamble_s);
  packet.rx_end = start + kernel_->to_ticks(air.total_s);
  packet.tx_location = sender.location();
  packet.sender_id = sender.id();

  packets_log_.push_back(PacketRecord{packet.seq, start, packet.sender_id, cfg.frequency_hz, cfg.sf, cfg.bw_hz, cfg.cr,
                                      cfg.preamble_symbols,
                                      kernel_->to_seconds(sim::SimTime{packet.rx_end.ticks - start.ticks}),
                                      cfg.tx_power_dbm, packet.tx_location, packet.payload});
  log::get("phy")->debug("{} tx seq {} at {:.9g} s: sf{} {} Hz, {} bytes, airtime {} s", sender.id(), packet.seq,
                         kernel_->now_seconds(), cfg.sf, cfg.frequency_hz, packet.payload.size(), air.total_s);

  // Radios are visited in registration order so shadowing draws are reproducible.
  const auto receivers = radios_;
  for (Radio* r : receivers) {
    if (r == &sender) {
      continue;
    }
    const double shadow = path_loss_.sigma_db > 0.0 ? shadowing_.normal(0.0, path_loss_.sigma_db) : 0.0;
    const LinkBudget link = link_budget(packet, r->location(), path_loss_, collision_.noise_figure_db, shadow);
    r->on_rx_start(packet, link);
  }
  return packet;
}

}  // namespace lorasim::phy
