#include "lorasim/phy/radio.hpp"

#include <algorithm>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"
#include "lorasim/phy/phy_layer.hpp"

namespace lorasim::phy {

namespace {

// Ended arrivals stay around this long so CAD scans and late collision checks still see them.
constexpr double kRetainSeconds = 1.0;

}  // namespace

const char* to_string(RadioState state) {
  switch (state) {
    case RadioState::sleep:
      return "sleep";
    case RadioState::standby:
      return "standby";
    case RadioState::rx:
      return "rx";
    case RadioState::tx:
      return "tx";
    case RadioState::cad:
      return "cad";
  }
  return "?";
}

Radio::Radio(PhyLayer& phy, std::string id, Location location, energy::PowerProfile profile)
    : phy_(&phy),
      id_(std::move(id)),
      location_(location),
      profile_(std::move(profile)),
      power_(phy.kernel(), id_, profile_.standby_w),
      rx_queue_(phy.kernel()) {
  profile_.validate();
  config_ = config_.normalized();
  index_ = phy_->attach(this);
}

Radio::~Radio() {
  auto& k = phy_->kernel();
  for (auto& f : in_flight_) {
    k.cancel_timer(f.preamble_timer);
    k.cancel_timer(f.end_timer);
  }
  phy_->detach(this);
}

void Radio::configure(const RadioConfig& config) {
  config.validate();
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " cannot be reconfigured while " + to_string(state_));
  }
  RadioConfig next = config.normalized();
  if (state_ == RadioState::rx && !config_match(next, config_)) {
    ++rx_epoch_;
    rx_since_ = phy_->kernel().now();
  }
  config_ = next;
}

bool Radio::matches(const RadioConfig& tx) const {
  if (!multi_sf_) {
    return config_match(tx, config_);
  }
  RadioConfig rx = config_;
  rx.sf = tx.sf;
  return config_match(tx, rx);
}

void Radio::set_state(RadioState state) {
  if (state == state_) {
    return;
  }
  state_ = state;
  switch (state) {
    case RadioState::sleep:
      power_.set_power(profile_.sleep_w);
      break;
    case RadioState::standby:
      power_.set_power(profile_.standby_w);
      break;
    case RadioState::rx:
    case RadioState::cad:
      power_.set_power(profile_.rx_w);
      break;
    case RadioState::tx:
      power_.set_power(profile_.tx_power_w(config_.tx_power_dbm));
      break;
  }
}

void Radio::enter_rx() {
  if (state_ != RadioState::rx) {
    set_state(RadioState::rx);
    rx_since_ = phy_->kernel().now();
  }
}

void Radio::leave_rx() {
  if (state_ == RadioState::rx) {
    ++rx_epoch_;
  }
}

void Radio::listen() {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " cannot listen while " + to_string(state_));
  }
  enter_rx();
  continuous_ = true;
}

void Radio::standby() {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " is busy (" + to_string(state_) + ")");
  }
  leave_rx();
  continuous_ = false;
  set_state(RadioState::standby);
}

void Radio::sleep() {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " is busy (" + to_string(state_) + ")");
  }
  leave_rx();
  continuous_ = false;
  set_state(RadioState::sleep);
}

sim::Task<> Radio::transmit(std::vector<std::uint8_t> payload) {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " is already busy (" + to_string(state_) + ")");
  }
  if (payload.size() > 255) {
    throw ArgumentError("payload of " + std::to_string(payload.size()) + " bytes exceeds 255");
  }
  leave_rx();
  continuous_ = false;
  set_state(RadioState::tx);
  const AirPacket packet = phy_->begin_transmission(*this, std::move(payload));
  co_await phy_->kernel().sleep_until(packet.rx_end);
  set_state(RadioState::standby);
}

sim::Task<std::optional<Reception>> Radio::receive(std::optional<double> timeout_seconds) {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " cannot receive while " + to_string(state_));
  }
  if (auto queued = rx_queue_.try_get()) {
    co_return queued;
  }
  auto& k = phy_->kernel();
  enter_rx();
  std::optional<Reception> result;
  if (!timeout_seconds) {
    result = co_await rx_queue_.get();
  } else {
    const sim::SimTime deadline = k.now() + k.to_ticks(*timeout_seconds);
    result = co_await rx_queue_.get_until(deadline);
    // A locked preamble keeps the receiver open until that packet ends.
    while (!result && active_locks_ > 0 && state_ == RadioState::rx) {
      result = co_await rx_queue_.get_until(lock_end_);
    }
  }
  if (!continuous_ && state_ == RadioState::rx) {
    standby();
  }
  co_return result;
}

sim::Task<bool> Radio::cad() {
  if (state_ == RadioState::tx || state_ == RadioState::cad) {
    throw StateError("radio " + id_ + " cannot start CAD while " + to_string(state_));
  }
  auto& k = phy_->kernel();
  leave_rx();
  continuous_ = false;
  set_state(RadioState::cad);
  const sim::SimTime t0 = k.now();
  const sim::SimTime t1 = t0 + k.to_ticks(2.0 * config_.symbol_seconds());
  co_await k.sleep_until(t1);
  const auto& params = phy_->collision();
  bool busy = std::any_of(in_flight_.begin(), in_flight_.end(), [&](const InFlight& f) {
    return f.arrival.start < t1 && t0 < f.arrival.end && f.arrival.frequency_hz == config_.frequency_hz &&
           f.arrival.sf == config_.sf &&
           f.link.rssi_dbm >= params.sensitivity(f.packet.config.sf, f.packet.config.bw_hz);
  });
  set_state(RadioState::standby);
  log::get("phy")->debug("{} CAD {} at {:.9g} s", id_, busy ? "busy" : "clear", k.now_seconds());
  co_return busy;
}

Radio::InFlight* Radio::find(std::uint64_t seq) {
  for (auto& f : in_flight_) {
    if (f.packet.seq == seq) {
      return &f;
    }
  }
  return nullptr;
}

std::vector<Arrival> Radio::interferers_of(const InFlight& f) const {
  std::vector<Arrival> out;
  out.reserve(in_flight_.size());
  for (const auto& other : in_flight_) {
    if (&other != &f) {
      out.push_back(other.arrival);
    }
  }
  return out;
}

void Radio::record(const InFlight& f, bool delivered, bool collided, bool preamble_missed, bool interrupted) {
  log_.push_back(ReceptionRecord{f.packet.seq, index_, f.packet.tx_start, id_, f.packet.sender_id, f.link.rssi_dbm,
                                 f.link.snr_db, delivered, collided, preamble_missed, interrupted});
}

void Radio::on_rx_start(AirPacket packet, const LinkBudget& link) {
  auto& k = phy_->kernel();
  InFlight f;
  f.arrival = Arrival{packet.tx_start,
                      packet.preamble_end,
                      packet.rx_end,
                      packet.config.symbol_seconds() / k.tick_duration(),
                      link.rssi_dbm,
                      packet.config.frequency_hz,
                      packet.config.sf};
  f.link = link;
  f.matched_at_start = state_ == RadioState::rx && matches(packet.config);
  const std::uint64_t seq = packet.seq;
  f.preamble_timer = k.call_at(packet.preamble_end, [this, seq] { on_preamble_end(seq); });
  f.end_timer = k.call_at(packet.rx_end, [this, seq] { on_rx_end(seq); });
  f.packet = std::move(packet);
  log::get("phy")->trace("{} rx start seq {} from {} rssi {:.2f} dBm{}", id_, seq, f.packet.sender_id, link.rssi_dbm,
                         f.matched_at_start ? "" : " (not matched)");
  in_flight_.push_back(std::move(f));
}

void Radio::on_preamble_end(std::uint64_t seq) {
  InFlight* f = find(seq);
  if (!f) {
    return;
  }
  f->preamble_timer = 0;
  const auto& params = phy_->collision();
  auto logger = log::get("phy");
  auto decide = [&](bool collided, bool missed, const char* why) {
    record(*f, false, collided, missed, false);
    f->finished = true;
    logger->debug("{} drops seq {} from {}: {}", id_, seq, f->packet.sender_id, why);
  };

  if (f->link.rssi_dbm < params.sensitivity(f->packet.config.sf, f->packet.config.bw_hz)) {
    return decide(false, false, "below sensitivity");
  }
  if (state_ != RadioState::rx) {
    return decide(false, true, "radio not listening");
  }
  if (!matches(f->packet.config)) {
    return decide(false, false, "configuration mismatch");
  }
  if (rx_since_ > critical_section_start(f->arrival, params.critical_preamble_symbols)) {
    return decide(false, true, "listening started too late");
  }
  auto others = interferers_of(*f);
  if (resolve_collision(f->arrival, others, params) == CollisionOutcome::lost_preamble) {
    return decide(true, true, "preamble collision");
  }
  f->locked = true;
  f->lock_epoch = rx_epoch_;
  ++active_locks_;
  lock_end_ = std::max(lock_end_, f->arrival.end);
  logger->trace("{} locked seq {}", id_, seq);
}

void Radio::on_rx_end(std::uint64_t seq) {
  InFlight* f = find(seq);
  if (!f) {
    return;
  }
  f->end_timer = 0;
  if (f->locked && !f->finished) {
    --active_locks_;
    f->finished = true;
    auto others = interferers_of(*f);
    const auto outcome = resolve_collision(f->arrival, others, phy_->collision());
    const bool collided = outcome != CollisionOutcome::received;
    const bool interrupted = collided || rx_epoch_ != f->lock_epoch;
    const bool delivered = !collided && !interrupted;
    record(*f, delivered, collided, false, interrupted);
    if (delivered) {
      log::get("phy")->debug("{} received seq {} from {} ({} bytes, rssi {:.2f} dBm)", id_, seq,
                             f->packet.sender_id, f->packet.payload.size(), f->link.rssi_dbm);
      rx_queue_.put(Reception{f->packet, f->link.rssi_dbm, f->link.snr_db, false, false, false});
    } else {
      log::get("phy")->debug("{} lost seq {} from {} ({})", id_, seq, f->packet.sender_id,
                             collided ? "payload collision" : "reception interrupted");
    }
  }
  prune();
}

void Radio::prune() {
  auto& k = phy_->kernel();
  const auto now = k.now();
  const auto retain = k.to_ticks(kRetainSeconds);
  sim::SimTime oldest_active{UINT64_MAX};
  for (const auto& f : in_flight_) {
    if (f.end_timer != 0) {
      oldest_active = std::min(oldest_active, f.arrival.start);
    }
  }
  std::erase_if(in_flight_, [&](const InFlight& f) {
    return f.end_timer == 0 && f.arrival.end <= oldest_active && f.arrival.end.ticks + retain < now.ticks;
  });
}

}  // namespace lorasim::phy
