#include "lorasim/lorawan/device.hpp"

#include <algorithm>

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"

namespace lorasim::lorawan {

namespace {

// Clears a busy flag when the owning coroutine finishes or is destroyed.
struct FlagGuard {
  bool* flag;
  explicit FlagGuard(bool* f) : flag(f) { *flag = true; }
  ~FlagGuard() { *flag = false; }
  FlagGuard(const FlagGuard&) = delete;
  FlagGuard& operator=(const FlagGuard&) = delete;
};

}  // namespace

Device::Device(phy::PhyLayer& phy, std::string id, phy::Location location, DeviceConfig config)
    : kernel_(&phy.kernel()),
      config_(std::move(config)),
      radio_(phy, id, location, config_.power),
      rng_(kernel_->rng_stream("device." + id)) {
  config_.rx.validate();
  config_.uplink.iq_inverted = false;
  config_.uplink.validate();
  config_.uplink = config_.uplink.normalized();
  if (config_.max_confirmed_retries < 0) throw ArgumentError("max_confirmed_retries must be >= 0");
  if (!(config_.join_backoff_s > 0) || config_.join_backoff_max_s < config_.join_backoff_s ||
      config_.join_backoff_jitter < 0 || config_.join_backoff_jitter >= 1) {
    throw ArgumentError("invalid join backoff parameters");
  }
  radio_.configure(config_.uplink);
  pump_task_ = kernel_->start_child_task(pump(), "device " + id + " rx");
}

Device::Device(phy::PhyLayer& phy, std::string id, phy::Location location, OtaaCredentials otaa, DeviceConfig config)
    : Device(phy, std::move(id), location, std::move(config)) {
  otaa_ = otaa;
  radio_.sleep();
}

Device::Device(phy::PhyLayer& phy, std::string id, phy::Location location, AbpCredentials abp, DeviceConfig config)
    : Device(phy, std::move(id), location, std::move(config)) {
  session_ = Session{abp.dev_addr, abp.nwk_skey, abp.app_skey, 0, std::nullopt};
  idle();
}

Device::~Device() { pump_task_.cancel(); }

std::uint32_t Device::dev_addr() const {
  if (!session_) throw StateError("device " + id() + " is not activated");
  return session_->dev_addr;
}

const std::optional<SessionKeys> Device::session_keys() const {
  if (!session_) return std::nullopt;
  return SessionKeys{session_->nwk_skey, session_->app_skey};
}

void Device::set_device_class(DeviceClass c) {
  config_.device_class = c;
  if (!busy_ && !joining_) idle();
}

void Device::register_application(std::shared_ptr<Application> app) { apps_.add(std::move(app)); }

void Device::join_multicast_group(const MulticastGroup& group) {
  for (const auto& g : groups_) {
    if (g.keys.mc_addr == group.mc_addr) throw RegistrationError("already a member of this multicast group");
  }
  groups_.push_back(Group{group, std::nullopt});
}

void Device::queue_mac_command(const MacCommand& cmd) {
  if (command_direction(cmd) != Direction::up) {
    throw ArgumentError("only uplink MAC commands can be queued at a device");
  }
  mac_pending_.push_back(cmd);
}

bool Device::class_c_active() const {
  return config_.device_class == DeviceClass::C && session_.has_value() && !joining_;
}

void Device::idle() {
  if (radio_.transmitting()) return;
  if (class_c_active()) {
    radio_.configure(rx2_config(config_.rx));
    radio_.listen();
  } else {
    radio_.sleep();
  }
}

std::uint16_t Device::fresh_dev_nonce() {
  if (used_nonces_.size() > 0xffff) throw StateError("device " + id() + " has exhausted its DevNonce space");
  for (;;) {
    const auto n = static_cast<std::uint16_t>(rng_.uniform_int(0, 0xffff));
    if (used_nonces_.insert(n).second) {
      dev_nonces_.push_back(n);
      return n;
    }
  }
}

sim::Task<> Device::transmit(std::vector<std::uint8_t> wire) {
  radio_.configure(config_.uplink);
  co_await radio_.transmit(std::move(wire));
  ++stats_.transmissions;
}

sim::Task<> Device::window(phy::RadioConfig cfg, bool session_class) {
  if (session_class && class_c_active() && radio_.receiving()) {
    // already receiving on RX2; finishing that frame takes priority over opening RX1
    while (radio_.receiving()) co_await kernel_->sleep_until(radio_.lock_end());
    co_await kernel_->sleep(0);
    co_return;
  }
  radio_.configure(cfg);
  radio_.listen();
  co_await kernel_->sleep(rx_window_seconds(cfg));
  while (radio_.receiving()) co_await kernel_->sleep_until(radio_.lock_end());
  // the frame was queued at this tick; let the pump consume it before deciding
  co_await kernel_->sleep(0);
}

sim::Task<> Device::rx_windows(sim::SimTime tx_end, phy::RadioConfig rx1, double d1, double d2, bool session_class) {
  window_hit_ = false;
  const bool continuous = session_class && class_c_active();
  if (continuous) {
    idle();
  } else {
    radio_.sleep();
  }
  co_await kernel_->sleep_until(tx_end + kernel_->to_ticks(d1));
  co_await window(rx1, session_class);
  if (!window_hit_) {
    const phy::RadioConfig rx2 = rx2_config(config_.rx);
    const sim::SimTime open = tx_end + kernel_->to_ticks(d2);
    if (continuous) {
      idle();
      const sim::SimTime close = open + kernel_->to_ticks(rx_window_seconds(rx2));
      if (kernel_->now() < close) co_await kernel_->sleep_until(close);
      while (radio_.receiving()) co_await kernel_->sleep_until(radio_.lock_end());
      co_await kernel_->sleep(0);
    } else {
      radio_.sleep();
      if (kernel_->now() < open) co_await kernel_->sleep_until(open);
      co_await window(rx2, session_class);
    }
  }
  idle();
}

sim::Task<> Device::join() {
  if (!otaa_) throw StateError("device " + id() + " uses ABP and cannot join");
  if (busy_ || joining_) throw StateError("device " + id() + " is busy");
  FlagGuard guard(&joining_);
  auto logger = log::get("lorawan");
  double backoff = config_.join_backoff_s;
  for (;;) {
    join_nonce_ = fresh_dev_nonce();
    const auto wire = build_join_request(JoinRequest{otaa_->app_eui, otaa_->dev_eui, join_nonce_, {}}, otaa_->app_key);
    ++stats_.join_requests;
    window_hit_ = false;
    logger->debug("{} join request dev_nonce {:04x} at {:.9g} s", id(), join_nonce_, kernel_->now_seconds());
    co_await transmit(wire);
    const sim::SimTime tx_end = kernel_->now();
    co_await rx_windows(tx_end, rx1_config(config_.uplink), config_.rx.join_accept_delay1_s,
                        config_.rx.join_accept_delay2_s, false);
    if (window_hit_ && session_) break;
    const double j = config_.join_backoff_jitter;
    co_await kernel_->sleep(backoff * rng_.uniform(1.0 - j, 1.0 + j));
    backoff = std::min(backoff * 2.0, config_.join_backoff_max_s);
  }
  logger->info("{} joined as {:08x} at {:.9g} s", id(), session_->dev_addr, kernel_->now_seconds());
  joining_ = false;
  idle();
}

void Device::handle_join_accept(const std::vector<std::uint8_t>& wire) {
  if (!joining_ || !otaa_) return;
  std::optional<JoinAccept> a;
  try {
    a = open_join_accept(wire, otaa_->app_key);
  } catch (const DecodeError&) {
    return;
  }
  if (!a) {
    ++stats_.mic_failures;
    log::get("lorawan")->debug("{} discarded join accept with bad MIC", id());
    return;
  }
  const auto keys = derive_session_keys(otaa_->app_key, a->app_nonce, a->net_id, join_nonce_);
  session_ = Session{a->dev_addr, keys.nwk_skey, keys.app_skey, 0, std::nullopt};
  const double rx1 = a->rx_delay == 0 ? 1.0 : static_cast<double>(a->rx_delay);
  config_.rx.rx2_delay_s = rx1 + (config_.rx.rx2_delay_s - config_.rx.rx1_delay_s);
  config_.rx.rx1_delay_s = rx1;
  if (const int dr = a->dl_settings & 0x0f; dr <= 5) config_.rx.rx2_sf = dr_to_sf(dr);
  need_ack_ = false;
  window_hit_ = true;
}

sim::Task<bool> Device::send_uplink(int fport, std::vector<std::uint8_t> payload, bool confirmed) {
  if (fport < 1 || fport > kMaxFPort) {
    throw ArgumentError("fport " + std::to_string(fport) + " outside 1..223");
  }
  if (!session_) throw StateError("device " + id() + " is not activated");
  if (busy_ || joining_) throw StateError("device " + id() + " is busy");

  MacFrame f;
  f.mtype = confirmed ? MType::confirmed_up : MType::unconfirmed_up;
  f.dev_addr = session_->dev_addr;
  f.fctrl.ack = need_ack_;
  std::size_t taken = 0;
  for (const auto& cmd : mac_pending_) {
    auto bytes = encode_commands(std::span(&cmd, 1));
    if (f.fopts.size() + bytes.size() > 15) break;
    f.fopts.insert(f.fopts.end(), bytes.begin(), bytes.end());
    ++taken;
  }
  f.fport = static_cast<std::uint8_t>(fport);
  f.frm_payload = std::move(payload);
  const auto wire = seal(std::move(f), session_->nwk_skey, session_->app_skey, session_->fcnt_up);

  FlagGuard guard(&busy_);
  need_ack_ = false;
  mac_pending_.erase(mac_pending_.begin(), mac_pending_.begin() + static_cast<std::ptrdiff_t>(taken));
  acked_ = false;
  ++stats_.uplinks;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0) ++stats_.retransmissions;
    co_await transmit(wire);
    const sim::SimTime tx_end = kernel_->now();
    co_await rx_windows(tx_end, rx1_config(config_.uplink), config_.rx.rx1_delay_s, config_.rx.rx2_delay_s, true);
    if (!confirmed || acked_ || attempt >= config_.max_confirmed_retries) break;
    const sim::SimTime rx2_close =
        tx_end + kernel_->to_ticks(config_.rx.rx2_delay_s + rx_window_seconds(rx2_config(config_.rx)));
    co_await kernel_->sleep_until(std::max(kernel_->now(), rx2_close) + kernel_->to_ticks(1.0));
  }
  ++session_->fcnt_up;
  if (confirmed) {
    if (acked_) {
      ++stats_.confirmed_acked;
    } else {
      ++stats_.confirmed_unacked;
    }
  }
  co_return !confirmed || acked_;
}

sim::Task<> Device::pump() {
  for (;;) {
    phy::Reception rx = co_await radio_.rx_queue().get();
    co_await handle(std::move(rx));
  }
}

sim::Task<> Device::handle(phy::Reception rx) {
  const auto& wire = rx.packet.payload;
  auto logger = log::get("lorawan");
  MType t;
  try {
    t = peek_mtype(wire);
  } catch (const DecodeError&) {
    co_return;
  }
  if (t == MType::join_accept) {
    handle_join_accept(wire);
    co_return;
  }
  if (t != MType::unconfirmed_down && t != MType::confirmed_down) co_return;
  MacFrame f;
  try {
    f = decode(wire);
  } catch (const DecodeError& e) {
    logger->debug("{} dropped malformed downlink: {}", id(), e.what());
    co_return;
  }

  const Key* nwk = nullptr;
  const Key* app = nullptr;
  std::optional<std::uint32_t>* last = nullptr;
  bool multicast = false;
  if (session_ && f.dev_addr == session_->dev_addr) {
    nwk = &session_->nwk_skey;
    app = &session_->app_skey;
    last = &session_->last_fcnt_down;
  } else {
    for (auto& g : groups_) {
      if (g.keys.mc_addr == f.dev_addr) {
        nwk = &g.keys.mc_nwk_skey;
        app = &g.keys.mc_app_skey;
        last = &g.last_fcnt;
        multicast = true;
        break;
      }
    }
  }
  if (!nwk) co_return;  // addressed to someone else

  const std::uint32_t fcnt32 = expand_fcnt(*last, f.fcnt);
  if (!verify_mic(wire, f, *nwk, fcnt32)) {
    ++stats_.mic_failures;
    logger->debug("{} downlink MIC mismatch", id());
    co_return;
  }
  if (*last && fcnt32 <= **last) {
    ++stats_.replays;
    co_return;
  }
  *last = fcnt32;
  ++stats_.downlinks;
  const auto payload = decrypt_payload(f, *nwk, *app, fcnt32);

  if (!multicast) {
    window_hit_ = true;
    if (f.fctrl.ack) acked_ = true;
    if (f.mtype == MType::confirmed_down) need_ack_ = true;
    auto cmds = parse_commands(f.fopts, Direction::down);
    if (f.fport == 0) {
      auto more = parse_commands(payload, Direction::down);
      cmds.insert(cmds.end(), more.begin(), more.end());
    }
    for (const auto& cmd : cmds) {
      if (const auto* a = std::get_if<LinkCheckAns>(&cmd)) {
        last_link_check_ = *a;
      } else if (const auto* r = std::get_if<LinkAdrReq>(&cmd)) {
        const bool dr_ok = r->data_rate == 15 || r->data_rate <= 5;
        const bool power_ok = r->tx_power == 15 || r->tx_power <= 7;
        const bool mask_ok = r->ch_mask_cntl == 6 || (r->ch_mask_cntl == 0 && (r->ch_mask & 0x1) != 0);
        if (dr_ok && power_ok && mask_ok) {
          if (r->data_rate != 15) config_.uplink.sf = dr_to_sf(r->data_rate);
          if (r->tx_power != 15) config_.uplink.tx_power_dbm = tx_power_index_to_dbm(r->tx_power);
          config_.uplink = config_.uplink.normalized();
        }
        mac_pending_.emplace_back(LinkAdrAns{power_ok, dr_ok, mask_ok});
      } else if (std::holds_alternative<DevStatusReq>(cmd)) {
        mac_pending_.emplace_back(DevStatusAns{config_.battery, status_margin(rx.snr_db)});
      }
    }
  }

  downlinks_.push_back(DownlinkRecord{kernel_->now(), f.dev_addr, fcnt32, f.fport,
                                      f.fport && *f.fport > 0 ? payload : std::vector<std::uint8_t>{}, rx.rssi_dbm,
                                      rx.snr_db, multicast, f.fctrl.ack});
  logger->debug("{} downlink fcnt {} port {} ({} bytes){}", id(), fcnt32, f.fport ? int(*f.fport) : -1,
                payload.size(), multicast ? " multicast" : "");
  if (f.fport && *f.fport > 0) {
    if (Application* a = apps_.find(*f.fport)) co_await a->on_downlink(payload);
  }
}

}  // namespace lorasim::lorawan
