#include "lorasim/lorawan/gateway.hpp"

#include <algorithm>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"
#include "lorasim/lorawan/network_server.hpp"
#include "lorasim/phy/airtime.hpp"

namespace lorasim::lorawan {

Gateway::Gateway(phy::PhyLayer& phy, std::string id, phy::Location location, NetworkServer& ns, GatewayConfig config)
    : kernel_(&phy.kernel()), ns_(&ns), config_(std::move(config)), radio_(phy, std::move(id), location, config_.power) {
  radio_.set_multi_sf(true);
  resume_listening();
  ns_->attach_gateway(this);
  pump_task_ = kernel_->start_child_task(pump(), "gateway " + radio_.id());
}

Gateway::~Gateway() {
  pump_task_.cancel();
  ns_->detach_gateway(this);
}

void Gateway::resume_listening() {
  radio_.configure(config_.uplink_channel);
  radio_.listen();
}

sim::Task<> Gateway::pump() {
  for (;;) {
    phy::Reception rx = co_await radio_.rx_queue().get();
    ++forwarded_;
    ns_->on_uplink(*this, rx);
  }
}

bool Gateway::is_free(sim::SimTime start, std::uint64_t duration) const {
  const sim::SimTime end = start + duration;
  return std::none_of(reservations_.begin(), reservations_.end(),
                      [&](const auto& r) { return start < r.second && r.first < end; });
}

sim::SimTime Gateway::next_free(sim::SimTime from, std::uint64_t duration) const {
  sim::SimTime t = from;
  // reservations are few; iterate until no conflict remains
  for (bool moved = true; moved;) {
    moved = false;
    for (const auto& r : reservations_) {
      if (t < r.second && r.first < t + duration) {
        t = r.second;
        moved = true;
      }
    }
  }
  return t;
}

void Gateway::schedule_downlink(sim::SimTime at, const phy::RadioConfig& cfg, std::vector<std::uint8_t> wire) {
  const auto duration = kernel_->to_ticks(phy::airtime(cfg.normalized(), wire.size()).total_s);
  if (!is_free(at, duration)) {
    throw StateError("gateway " + id() + " already transmits at " + std::to_string(kernel_->to_seconds(at)) + " s");
  }
  std::erase_if(reservations_, [&](const auto& r) { return r.second <= kernel_->now(); });
  reservations_.emplace_back(at, at + duration);
  kernel_->start_child_task(send(at, cfg, std::move(wire)), "gateway " + id() + " tx");
}

sim::Task<> Gateway::send(sim::SimTime at, phy::RadioConfig cfg, std::vector<std::uint8_t> wire) {
  co_await kernel_->sleep_until(at);
  radio_.configure(cfg);
  co_await radio_.transmit(std::move(wire));
  ++sent_;
  resume_listening();
}

}  // namespace lorasim::lorawan
