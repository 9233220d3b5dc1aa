#include "lorasim/scenario/runner.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <set>

#include "lorasim/firmware/firmware.hpp"
#include "lorasim/log.hpp"
#include "lorasim/lorawan/device.hpp"
#include "lorasim/lorawan/gateway.hpp"
#include "lorasim/lorawan/network_server.hpp"
#include "lorasim/phy/phy_layer.hpp"

namespace lorasim::scenario {

using sim::Kernel;
using sim::SimTime;
using sim::Task;

namespace {

class ReplyApplication : public lorawan::Application {
 public:
  ReplyApplication(lorawan::NetworkServer& ns, ApplicationSpec spec) : ns_(&ns), spec_(std::move(spec)) {}

  int port() const override { return spec_.fport; }

  Task<> on_uplink(std::uint32_t dev_addr, std::vector<std::uint8_t> payload) override {
    if (!spec_.match || payload == *spec_.match) ns_->queue_downlink(dev_addr, spec_.fport, spec_.reply);
    co_return;
  }

 private:
  lorawan::NetworkServer* ns_;
  ApplicationSpec spec_;
};

struct Node {
  const DeviceSpec* spec = nullptr;
  std::unique_ptr<lorawan::Device> device;
  std::unique_ptr<phy::Radio> radio;  // firmware-backed nodes
  std::unique_ptr<firmware::FirmwareInstance> firmware;
  std::size_t ns_index = 0;
  std::optional<SimTime> activated_at;
};

Task<> drive(Kernel& k, Node& node, sim::Rng rng) {
  const DeviceSpec& s = *node.spec;
  if (s.start_s > 0) co_await k.sleep_until(k.at_seconds(s.start_s));
  if (s.activation == Activation::otaa) co_await node.device->join();
  node.activated_at = k.now();
  if (!s.traffic) co_return;
  const TrafficSpec& t = *s.traffic;
  const SimTime anchor = k.now();
  for (std::uint64_t i = 0;; ++i) {
    const double offset = static_cast<double>(i) * t.period_s + (t.jitter_s > 0 ? rng.uniform(0.0, t.jitter_s) : 0.0);
    const SimTime at = anchor + k.to_ticks(offset);
    if (at > k.now()) co_await k.sleep_until(at);
    co_await node.device->send_uplink(t.fport, t.payload, t.confirmed);
  }
}

phy::RadioConfig uplink_config(const DeviceSpec& s) {
  phy::RadioConfig cfg;
  cfg.sf = s.sf;
  cfg.tx_power_dbm = s.tx_power_dbm;
  cfg.frequency_hz = s.frequency_hz;
  return cfg.normalized();
}

void snapshot(Kernel& k, const phy::PhyLayer& phy, RunOutputs& out) {
  out.phy_packets = phy.packets_log();
  std::stable_sort(out.phy_packets.begin(), out.phy_packets.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.time, a.seq) < std::tie(b.time, b.seq); });

  for (const phy::Radio* r : phy.radios()) {
    out.radio_receptions.insert(out.radio_receptions.end(), r->packets_log().begin(), r->packets_log().end());
    for (const auto& e : r->power().events()) {
      out.energy_events.push_back(EnergyRow{e.time, r->id(), r->index(), e.power_w, e.cumulative_j});
    }
    // closing row: the draw in force at the end and the total through the end
    out.energy_events.push_back(EnergyRow{k.now(), r->id(), r->index(), r->power().power(), r->power().total_energy()});
  }
  std::stable_sort(out.radio_receptions.begin(), out.radio_receptions.end(), [](const auto& a, const auto& b) {
    return std::tie(a.time, a.packet_seq, a.radio_index) < std::tie(b.time, b.packet_seq, b.radio_index);
  });
  std::stable_sort(out.energy_events.begin(), out.energy_events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.time, a.radio_index) < std::tie(b.time, b.radio_index);
  });
  out.events = k.dispatched_events();
}

}  // namespace

RunOutputs run_scenario(const ScenarioSpec& spec) {
  validate(spec);
  auto logger = log::get("cli");

  Kernel k(sim::SimConfig{.tick_duration = spec.tick_s, .seed = spec.seed, .length = spec.length_s});
  phy::PhyLayer phy(k, spec.phy.path_loss, spec.phy.collision);
  lorawan::NetworkServerConfig ns_cfg;
  ns_cfg.net_id = spec.net_id;
  lorawan::NetworkServer ns(k, ns_cfg);

  std::vector<std::unique_ptr<lorawan::Gateway>> gateways;
  for (const auto& g : spec.gateways) gateways.push_back(std::make_unique<lorawan::Gateway>(phy, g.id, g.location, ns));
  for (const auto& a : spec.applications) ns.register_application(std::make_shared<ReplyApplication>(ns, a));

  std::vector<Node> nodes(spec.devices.size());
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < spec.devices.size(); ++i) {
    const DeviceSpec& s = spec.devices[i];
    Node& n = nodes[i];
    n.spec = &s;
    by_id[s.id] = i;
    if (s.firmware) {
      n.radio = std::make_unique<phy::Radio>(phy, s.id, s.location);
      n.radio->configure(uplink_config(s));
      firmware::FirmwareOptions opts;
      opts.name = s.id;
      opts.watchdog_s = s.firmware->watchdog_s;
      n.firmware = firmware::load_firmware(k, firmware::FirmwareImage{s.firmware->path, s.firmware->entry}, std::move(opts));
      continue;
    }
    lorawan::DeviceConfig cfg;
    cfg.device_class = s.device_class;
    cfg.uplink = uplink_config(s);
    if (s.activation == Activation::otaa) {
      n.ns_index = ns.register_otaa_device(s.otaa.app_eui, s.otaa.dev_eui, s.otaa.app_key, s.device_class);
      n.device = std::make_unique<lorawan::Device>(phy, s.id, s.location, s.otaa, cfg);
    } else {
      n.ns_index = ns.register_abp_device(s.abp.dev_addr, s.abp.nwk_skey, s.abp.app_skey, s.device_class);
      n.device = std::make_unique<lorawan::Device>(phy, s.id, s.location, s.abp, cfg);
    }
    k.create_task(drive(k, n, k.rng_stream("traffic/" + s.id)), s.id);
  }

  for (const auto& g : spec.multicast_groups) {
    lorawan::MulticastGroup group{g.mc_addr, g.mc_nwk_skey, g.mc_app_skey, 0};
    std::vector<std::size_t> members;
    for (const auto& id : g.members) {
      Node& n = nodes[by_id.at(id)];
      members.push_back(n.ns_index);
      n.device->join_multicast_group(group);
    }
    ns.register_multicast_group(group, members);
    for (const auto& send : g.sends) {
      k.call_at(k.at_seconds(send.at_s), [&ns, mc = g.mc_addr, send] { ns.send_multicast(mc, send.fport, send.payload); });
    }
  }

  for (Node& n : nodes) {
    if (n.firmware) n.firmware->start(*n.radio);
  }

  RunOutputs out;
  out.tick_s = spec.tick_s;
  out.length_s = spec.length_s;
  for (const auto& g : spec.gateways) out.gateway_ids.push_back(g.id);
  k.on_sim_end([&] { snapshot(k, phy, out); });
  logger->info("running {} gateways and {} devices for {} s", spec.gateways.size(), spec.devices.size(), spec.length_s);
  k.run(spec.length_s);

  // application-level view of the run
  std::map<std::uint32_t, std::string> addr_owner;
  for (const Node& n : nodes) {
    if (n.device && n.device->activated()) addr_owner[n.device->dev_addr()] = n.spec->id;
  }
  for (const auto& up : ns.uplinks()) {
    if (!up.fport || *up.fport == 0) continue;
    auto it = addr_owner.find(up.dev_addr);
    out.app_frames.push_back(AppFrame{up.time, it == addr_owner.end() ? std::string() : it->second,
                                      AppFrame::Direction::uplink, up.fport, up.payload});
  }
  for (const Node& n : nodes) {
    if (!n.device) continue;
    for (const auto& d : n.device->downlinks()) {
      if (!d.fport || *d.fport == 0) continue;
      out.app_frames.push_back(AppFrame{d.time, n.spec->id, AppFrame::Direction::downlink, d.fport, d.payload});
    }
  }
  std::stable_sort(out.app_frames.begin(), out.app_frames.end(),
                   [](const AppFrame& a, const AppFrame& b) { return a.time < b.time; });

  std::vector<std::string> ids;
  for (const auto& d : spec.devices) ids.push_back(d.id);
  out.summary = summarize(out, ids);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].activated_at) out.summary[i].activated_at_s = k.to_seconds(*nodes[i].activated_at);
  }
  return out;
}

std::vector<DeviceSummary> summarize(const RunOutputs& out, const std::vector<std::string>& device_ids) {
  const std::set<std::string> gateways(out.gateway_ids.begin(), out.gateway_ids.end());
  std::map<std::string, std::uint64_t> sent;
  std::map<std::uint64_t, const std::string*> sender_of;
  for (const auto& p : out.phy_packets) {
    ++sent[p.sender_id];
    sender_of[p.seq] = &p.sender_id;
  }
  std::map<std::string, std::set<std::uint64_t>> delivered;
  std::map<std::string, std::pair<double, std::uint64_t>> snr;  // sum, count
  for (const auto& r : out.radio_receptions) {
    if (!r.delivered || !gateways.count(r.radio_id)) continue;
    auto it = sender_of.find(r.packet_seq);
    if (it == sender_of.end()) continue;
    delivered[*it->second].insert(r.packet_seq);
    auto& acc = snr[*it->second];
    acc.first += r.snr_db;
    ++acc.second;
  }
  std::map<std::string, double> energy;
  for (const auto& e : out.energy_events) energy[e.radio_id] = std::max(energy[e.radio_id], e.cumulative_j);

  std::vector<DeviceSummary> result;
  for (const auto& id : device_ids) {
    DeviceSummary s;
    s.id = id;
    s.sent = sent[id];
    s.delivered = delivered[id].size();
    s.pdr = s.sent ? static_cast<double>(s.delivered) / static_cast<double>(s.sent) : 0.0;
    if (auto it = snr.find(id); it != snr.end() && it->second.second > 0) {
      s.mean_snr_db = it->second.first / static_cast<double>(it->second.second);
    }
    s.energy_j = energy[id];
    result.push_back(std::move(s));
  }
  return result;
}

}  // namespace lorasim::scenario
