#include "lorasim/lorawan/network_server.hpp"

#include <algorithm>

#include "lorasim/errors.hpp"
#include "lorasim/hex.hpp"
#include "lorasim/log.hpp"
#include "lorasim/lorawan/gateway.hpp"
#include "lorasim/phy/airtime.hpp"

namespace lorasim::lorawan {

const char* to_string(DeviceClass c) { return c == DeviceClass::A ? "A" : "C"; }

NetworkServer::NetworkServer(sim::Kernel& kernel, NetworkServerConfig config)
    : kernel_(&kernel), config_(config), rng_(kernel.rng_stream("ns")) {
  config_.rx.validate();
  if (config_.net_id > 0xffffff) throw ArgumentError("net_id must fit in 24 bits");
  if (!(config_.dedup_window_s >= 0)) throw ArgumentError("dedup window must be >= 0");
}

NetworkServer::~NetworkServer() = default;

std::size_t NetworkServer::register_otaa_device(std::uint64_t app_eui, std::uint64_t dev_eui, const Key& app_key,
                                                DeviceClass device_class) {
  for (const auto& r : devices_) {
    if (r.otaa && r.dev_eui == dev_eui) {
      throw RegistrationError("dev_eui " + std::to_string(dev_eui) + " is already registered");
    }
  }
  Record rec;
  rec.device_class = device_class;
  rec.otaa = true;
  rec.app_eui = app_eui;
  rec.dev_eui = dev_eui;
  rec.app_key = app_key;
  devices_.push_back(std::move(rec));
  return devices_.size() - 1;
}

std::size_t NetworkServer::register_abp_device(std::uint32_t dev_addr, const Key& nwk_skey, const Key& app_skey,
                                               DeviceClass device_class) {
  if (addr_index_.contains(dev_addr)) {
    throw RegistrationError("dev_addr is already in use");
  }
  Record rec;
  rec.device_class = device_class;
  Session s;
  s.dev_addr = dev_addr;
  s.nwk_skey = nwk_skey;
  s.app_skey = app_skey;
  rec.session = std::move(s);
  devices_.push_back(std::move(rec));
  addr_index_[dev_addr] = devices_.size() - 1;
  return devices_.size() - 1;
}

void NetworkServer::register_application(std::shared_ptr<Application> app) { apps_.add(std::move(app)); }

void NetworkServer::register_multicast_group(const MulticastGroup& group, std::vector<std::size_t> members) {
  if (groups_.contains(group.mc_addr)) {
    throw RegistrationError("multicast group already registered");
  }
  for (std::size_t m : members) {
    if (m >= devices_.size()) throw ArgumentError("unknown device handle " + std::to_string(m));
  }
  groups_[group.mc_addr] = Group{group, std::move(members)};
}

void NetworkServer::add_multicast_member(std::uint32_t mc_addr, std::size_t device) {
  auto it = groups_.find(mc_addr);
  if (it == groups_.end()) throw ArgumentError("unknown multicast group");
  if (device >= devices_.size()) throw ArgumentError("unknown device handle " + std::to_string(device));
  it->second.members.push_back(device);
}

NetworkServer::Record* NetworkServer::by_addr(std::uint32_t dev_addr) {
  auto it = addr_index_.find(dev_addr);
  return it == addr_index_.end() ? nullptr : &devices_[it->second];
}

const NetworkServer::Record* NetworkServer::by_addr(std::uint32_t dev_addr) const {
  auto it = addr_index_.find(dev_addr);
  return it == addr_index_.end() ? nullptr : &devices_[it->second];
}

DeviceState NetworkServer::view(const Record& rec) const {
  DeviceState v;
  v.device_class = rec.device_class;
  if (rec.session) {
    const Session& s = *rec.session;
    v.activated = true;
    v.dev_addr = s.dev_addr;
    v.last_fcnt_up = s.last_fcnt_up;
    v.fcnt_down = s.fcnt_down;
    v.queued_downlinks = s.queue.size();
    v.best_gateway = s.best_gateway;
    v.dev_status = s.dev_status;
    v.link_adr = s.link_adr;
  }
  return v;
}

std::optional<DeviceState> NetworkServer::device(std::uint32_t dev_addr) const {
  const Record* r = by_addr(dev_addr);
  if (!r) return std::nullopt;
  return view(*r);
}

std::optional<DeviceState> NetworkServer::device_by_eui(std::uint64_t dev_eui) const {
  for (const auto& r : devices_) {
    if (r.otaa && r.dev_eui == dev_eui) return view(r);
  }
  return std::nullopt;
}

void NetworkServer::attach_gateway(Gateway* gw) { gateways_.push_back(gw); }
void NetworkServer::detach_gateway(Gateway* gw) { std::erase(gateways_, gw); }

Gateway* NetworkServer::gateway_by_id(const std::string& id) const {
  for (Gateway* g : gateways_) {
    if (g->id() == id) return g;
  }
  return nullptr;
}

Gateway* NetworkServer::best_gateway_for(const Session& s) const {
  if (Gateway* g = gateway_by_id(s.best_gateway)) return g;
  return gateways_.empty() ? nullptr : gateways_.front();
}

void NetworkServer::set_device_class(std::uint32_t dev_addr, DeviceClass device_class) {
  Record* rec = by_addr(dev_addr);
  if (!rec) throw ArgumentError("unknown dev_addr");
  rec->device_class = device_class;
  if (device_class == DeviceClass::C) flush_class_c(*rec);
}

void NetworkServer::queue_downlink(std::uint32_t dev_addr, int fport, std::vector<std::uint8_t> payload,
                                   bool confirmed) {
  Record* rec = by_addr(dev_addr);
  if (!rec || !rec->session) {
    throw ArgumentError("unknown dev_addr " + to_hex(std::vector<std::uint8_t>{
                                                  static_cast<std::uint8_t>(dev_addr >> 24),
                                                  static_cast<std::uint8_t>(dev_addr >> 16),
                                                  static_cast<std::uint8_t>(dev_addr >> 8),
                                                  static_cast<std::uint8_t>(dev_addr)}));
  }
  if (fport < 1 || fport > kMaxFPort) {
    throw ArgumentError("fport " + std::to_string(fport) + " outside 1..223");
  }
  rec->session->queue.push_back(QueuedDownlink{static_cast<std::uint8_t>(fport), std::move(payload), confirmed});
  if (rec->device_class == DeviceClass::C) flush_class_c(*rec);
}

void NetworkServer::queue_mac_command(std::uint32_t dev_addr, const MacCommand& cmd) {
  Record* rec = by_addr(dev_addr);
  if (!rec || !rec->session) throw ArgumentError("unknown dev_addr");
  if (command_direction(cmd) != Direction::down) {
    throw ArgumentError("only downlink MAC commands can be queued at the server");
  }
  rec->session->mac_pending.push_back(cmd);
  if (rec->device_class == DeviceClass::C) flush_class_c(*rec);
}

bool NetworkServer::has_downlink(const Session& s) {
  return !s.queue.empty() || !s.mac_pending.empty() || s.need_ack;
}

std::vector<std::uint8_t> NetworkServer::build_downlink(Session& s) {
  MacFrame f;
  f.dev_addr = s.dev_addr;
  f.mtype = MType::unconfirmed_down;
  f.fctrl.ack = s.need_ack;
  s.need_ack = false;

  std::vector<std::uint8_t> fopts;
  std::size_t taken = 0;
  for (const auto& cmd : s.mac_pending) {
    auto bytes = encode_commands(std::span(&cmd, 1));
    if (fopts.size() + bytes.size() > 15) break;
    fopts.insert(fopts.end(), bytes.begin(), bytes.end());
    ++taken;
  }
  s.mac_pending.erase(s.mac_pending.begin(), s.mac_pending.begin() + static_cast<std::ptrdiff_t>(taken));
  f.fopts = std::move(fopts);

  if (!s.queue.empty()) {
    QueuedDownlink d = std::move(s.queue.front());
    s.queue.pop_front();
    f.fport = d.fport;
    f.frm_payload = std::move(d.payload);
    if (d.confirmed) f.mtype = MType::confirmed_down;
  }
  f.fctrl.fpending = !s.queue.empty() || !s.mac_pending.empty();
  auto wire = seal(std::move(f), s.nwk_skey, s.app_skey, s.fcnt_down);
  ++s.fcnt_down;
  return wire;
}

void NetworkServer::schedule_class_a(Record& rec, const Pending& p) {
  Session& s = *rec.session;
  if (!has_downlink(s)) return;
  Gateway* gw = best_gateway_for(s);
  if (!gw) return;
  Session trial = s;
  auto wire = build_downlink(trial);
  const auto& rx = config_.rx;
  phy::RadioConfig rx1 = rx1_config(p.uplink);
  rx1.tx_power_dbm = config_.downlink_power_dbm;
  const phy::RadioConfig rx2 = rx2_config(rx, config_.downlink_power_dbm);
  for (auto [cfg, delay] : {std::pair{rx1, rx.rx1_delay_s}, std::pair{rx2, rx.rx2_delay_s}}) {
    const sim::SimTime at = p.first_seen + kernel_->to_ticks(delay);
    if (at < kernel_->now()) continue;  // the application held the frame past this window
    const auto dur = kernel_->to_ticks(phy::airtime(cfg, wire.size()).total_s);
    if (gw->is_free(at, dur)) {
      gw->schedule_downlink(at, cfg, std::move(wire));
      s = std::move(trial);
      ++stats_.downlinks;
      return;
    }
  }
  ++stats_.downlinks_deferred;
  log::get("lorawan")->debug("no gateway slot for downlink to {:08x}; kept queued", s.dev_addr);
}

void NetworkServer::flush_class_c(Record& rec) {
  if (!rec.session || rec.session->processing) return;
  Session& s = *rec.session;
  const phy::RadioConfig cfg = rx2_config(config_.rx, config_.downlink_power_dbm);
  while (has_downlink(s)) {
    Gateway* gw = best_gateway_for(s);
    if (!gw) return;
    auto wire = build_downlink(s);
    const auto dur = kernel_->to_ticks(phy::airtime(cfg, wire.size()).total_s);
    gw->schedule_downlink(gw->next_free(kernel_->now(), dur), cfg, std::move(wire));
    ++stats_.downlinks;
  }
}

void NetworkServer::send_multicast(std::uint32_t mc_addr, int fport, std::vector<std::uint8_t> payload) {
  auto it = groups_.find(mc_addr);
  if (it == groups_.end()) throw ArgumentError("unknown multicast group");
  if (fport < 1 || fport > kMaxFPort) throw ArgumentError("fport " + std::to_string(fport) + " outside 1..223");
  Group& g = it->second;
  MacFrame f;
  f.mtype = MType::unconfirmed_down;
  f.dev_addr = mc_addr;
  f.fport = static_cast<std::uint8_t>(fport);
  f.frm_payload = std::move(payload);
  auto wire = seal(std::move(f), g.group.mc_nwk_skey, g.group.mc_app_skey, g.group.fcnt_down);
  ++g.group.fcnt_down;

  std::vector<Gateway*> targets;
  for (std::size_t m : g.members) {
    const auto& rec = devices_[m];
    if (!rec.session) continue;
    if (Gateway* gw = gateway_by_id(rec.session->best_gateway); gw && std::find(targets.begin(), targets.end(), gw) == targets.end()) {
      targets.push_back(gw);
    }
  }
  if (targets.empty()) targets = gateways_;
  const phy::RadioConfig cfg = rx2_config(config_.rx, config_.downlink_power_dbm);
  const auto dur = kernel_->to_ticks(phy::airtime(cfg, wire.size()).total_s);
  // copies go out back to back: simultaneous copies on the same channel collide at members
  // that hear two gateways at similar strength
  sim::SimTime at = kernel_->now();
  for (Gateway* gw : targets) {
    at = gw->next_free(at, dur);
    gw->schedule_downlink(at, cfg, wire);
    at = at + dur;
    ++stats_.downlinks;
  }
}

void NetworkServer::prune_dedup() {
  const auto window = kernel_->to_ticks(config_.dedup_window_s);
  const auto now = kernel_->now();
  std::erase_if(dedup_, [&](const auto& kv) {
    return kv.second.processed && kv.second.first_seen.ticks + window < now.ticks;
  });
}

void NetworkServer::on_uplink(Gateway& gw, const phy::Reception& rx) {
  ++stats_.frames_received;
  const auto& wire = rx.packet.payload;
  auto logger = log::get("lorawan");
  DedupKey key;
  try {
    const MType t = peek_mtype(wire);
    if (t == MType::join_request) {
      const JoinRequest req = decode_join_request(wire);
      key = {req.dev_eui, req.dev_nonce, req.mic};
    } else if (t == MType::unconfirmed_up || t == MType::confirmed_up) {
      const MacFrame f = decode(wire);
      key = {f.dev_addr, f.fcnt, f.mic};
    } else {
      return;
    }
  } catch (const DecodeError& e) {
    ++stats_.malformed;
    logger->debug("gateway {} dropped malformed frame: {}", gw.id(), e.what());
    return;
  }

  prune_dedup();
  const Copy copy{gw.id(), rx.rssi_dbm, rx.snr_db};
  if (auto it = dedup_.find(key); it != dedup_.end()) {
    if (kernel_->now().ticks - it->second.first_seen.ticks <= kernel_->to_ticks(config_.dedup_window_s)) {
      ++stats_.duplicates;
      if (!it->second.processed) it->second.copies.push_back(copy);
      return;
    }
    dedup_.erase(it);
  }
  dedup_.emplace(key, Pending{kernel_->now(), wire, rx.packet.config, {copy}, false});
  kernel_->start_child_task(process(key), "ns uplink");
}

sim::Task<> NetworkServer::process(DedupKey key) {
  // let every gateway copy from this tick arrive first
  co_await kernel_->sleep(0);
  Pending& p = dedup_.at(key);
  if (peek_mtype(p.wire) == MType::join_request) {
    handle_join(p);
  } else {
    co_await handle_data(p);
  }
  dedup_.at(key).processed = true;
}

void NetworkServer::handle_join(Pending& p) {
  auto logger = log::get("lorawan");
  const JoinRequest req = decode_join_request(p.wire);
  auto it = std::find_if(devices_.begin(), devices_.end(),
                         [&](const Record& r) { return r.otaa && r.dev_eui == req.dev_eui; });
  if (it == devices_.end() || it->app_eui != req.app_eui) {
    ++stats_.unknown_devices;
    logger->debug("join request from unknown dev_eui {:016x}", req.dev_eui);
    return;
  }
  Record& rec = *it;
  if (!verify_join_request(p.wire, rec.app_key)) {
    ++stats_.mic_failures;
    logger->debug("join request MIC mismatch for dev_eui {:016x}", req.dev_eui);
    return;
  }
  if (!rec.used_nonces.insert(req.dev_nonce).second) {
    ++stats_.replays;
    logger->debug("join request replays dev_nonce {:04x}", req.dev_nonce);
    return;
  }

  const auto best = std::max_element(p.copies.begin(), p.copies.end(),
                                     [](const Copy& a, const Copy& b) { return a.rssi_dbm < b.rssi_dbm; });
  JoinAccept accept;
  accept.app_nonce = static_cast<std::uint32_t>(rng_.uniform_int(0, 0xffffff));
  accept.net_id = config_.net_id;
  do {  // skip addresses held by ABP devices
    accept.dev_addr = ((config_.net_id & 0x7f) << 25) | (next_nwk_addr_++ & 0x1ffffff);
  } while (addr_index_.count(accept.dev_addr));
  accept.dl_settings = static_cast<std::uint8_t>(sf_to_dr(config_.rx.rx2_sf) & 0x0f);
  accept.rx_delay = static_cast<std::uint8_t>(std::clamp<long>(std::lround(config_.rx.rx1_delay_s), 1, 15));
  const auto keys = derive_session_keys(rec.app_key, accept.app_nonce, accept.net_id, req.dev_nonce);

  if (rec.session) addr_index_.erase(rec.session->dev_addr);
  Session s;
  s.dev_addr = accept.dev_addr;
  s.nwk_skey = keys.nwk_skey;
  s.app_skey = keys.app_skey;
  s.best_gateway = best->gateway;
  rec.session = std::move(s);
  addr_index_[accept.dev_addr] = static_cast<std::size_t>(it - devices_.begin());
  ++stats_.joins;

  auto wire = build_join_accept(accept, rec.app_key);
  Gateway* gw = gateway_by_id(best->gateway);
  if (!gw) return;
  phy::RadioConfig rx1 = rx1_config(p.uplink);
  rx1.tx_power_dbm = config_.downlink_power_dbm;
  const phy::RadioConfig rx2 = rx2_config(config_.rx, config_.downlink_power_dbm);
  for (auto [cfg, delay] : {std::pair{rx1, config_.rx.join_accept_delay1_s},
                            std::pair{rx2, config_.rx.join_accept_delay2_s}}) {
    const sim::SimTime at = p.first_seen + kernel_->to_ticks(delay);
    const auto dur = kernel_->to_ticks(phy::airtime(cfg, wire.size()).total_s);
    if (gw->is_free(at, dur)) {
      gw->schedule_downlink(at, cfg, std::move(wire));
      ++stats_.downlinks;
      logger->info("join accept for dev_eui {:016x} -> dev_addr {:08x}", req.dev_eui, accept.dev_addr);
      return;
    }
  }
  ++stats_.downlinks_deferred;
}

sim::Task<> NetworkServer::handle_data(Pending& p) {
  auto logger = log::get("lorawan");
  const MacFrame f = decode(p.wire);
  auto idx_it = addr_index_.find(f.dev_addr);
  if (idx_it == addr_index_.end() || !devices_[idx_it->second].session) {
    ++stats_.unknown_devices;
    co_return;
  }
  const std::size_t idx = idx_it->second;
  Session& s = *devices_[idx].session;
  const std::uint32_t fcnt32 = expand_fcnt(s.last_fcnt_up, f.fcnt);
  if (!verify_mic(p.wire, f, s.nwk_skey, fcnt32)) {
    ++stats_.mic_failures;
    logger->debug("uplink MIC mismatch from {:08x}", f.dev_addr);
    co_return;
  }
  const auto best = *std::max_element(p.copies.begin(), p.copies.end(),
                                      [](const Copy& a, const Copy& b) { return a.rssi_dbm < b.rssi_dbm; });
  const bool confirmed = f.mtype == MType::confirmed_up;
  if (s.last_fcnt_up && fcnt32 <= *s.last_fcnt_up) {
    if (fcnt32 == *s.last_fcnt_up && confirmed) {
      // retransmission of a confirmed frame: acknowledge again, do not redeliver
      s.need_ack = true;
      s.best_gateway = best.gateway;
      if (devices_[idx].device_class == DeviceClass::A) {
        schedule_class_a(devices_[idx], p);
      } else {
        flush_class_c(devices_[idx]);
      }
      co_return;
    }
    ++stats_.replays;
    logger->debug("stale fcnt {} from {:08x}", fcnt32, f.dev_addr);
    co_return;
  }
  s.last_fcnt_up = fcnt32;
  s.best_gateway = best.gateway;
  if (confirmed) s.need_ack = true;
  ++stats_.uplinks;

  const auto payload = decrypt_payload(f, s.nwk_skey, s.app_skey, fcnt32);
  std::vector<MacCommand> cmds = parse_commands(f.fopts, Direction::up);
  if (f.fport == 0) {
    auto more = parse_commands(payload, Direction::up);
    cmds.insert(cmds.end(), more.begin(), more.end());
  }
  for (const auto& cmd : cmds) {
    if (std::holds_alternative<LinkCheckReq>(cmd)) {
      s.mac_pending.emplace_back(LinkCheckAns{link_margin(best.snr_db, p.uplink.sf),
                                              static_cast<std::uint8_t>(std::min<std::size_t>(p.copies.size(), 255))});
    } else if (const auto* a = std::get_if<LinkAdrAns>(&cmd)) {
      s.link_adr = *a;
    } else if (const auto* d = std::get_if<DevStatusAns>(&cmd)) {
      s.dev_status = *d;
    }
  }

  uplinks_.push_back(UplinkRecord{p.first_seen, f.dev_addr, fcnt32, confirmed, f.fport,
                                  f.fport && *f.fport > 0 ? payload : std::vector<std::uint8_t>{}, p.copies.size(),
                                  best.gateway, best.rssi_dbm, best.snr_db});
  logger->debug("uplink {:08x} fcnt {} via {} gateway(s)", f.dev_addr, fcnt32, p.copies.size());

  if (f.fport && *f.fport > 0) {
    if (Application* app = apps_.find(*f.fport)) {
      s.processing = true;
      try {
        co_await app->on_uplink(f.dev_addr, payload);
      } catch (...) {
        devices_[idx].session->processing = false;
        throw;
      }
      devices_[idx].session->processing = false;
    } else {
      logger->debug("no application on port {}", *f.fport);
    }
  }
  Record& rec = devices_[idx];
  if (!rec.session || rec.session->dev_addr != f.dev_addr) co_return;
  if (rec.device_class == DeviceClass::A) {
    schedule_class_a(rec, p);
  } else {
    flush_class_c(rec);
  }
}

}  // namespace lorasim::lorawan
