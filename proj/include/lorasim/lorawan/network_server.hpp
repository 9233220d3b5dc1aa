#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lorasim/lorawan/application.hpp"
#include "lorasim/lorawan/crypto.hpp"
#include "lorasim/lorawan/frame.hpp"
#include "lorasim/lorawan/mac_commands.hpp"
#include "lorasim/lorawan/region.hpp"
#include "lorasim/lorawan/session.hpp"
#include "lorasim/phy/types.hpp"
#include "lorasim/sim/kernel.hpp"

namespace lorasim::lorawan {

class Gateway;

struct NetworkServerConfig {
  std::uint32_t net_id = 0x000013;
  RxWindowParams rx{};
  double dedup_window_s = 0.2;
  double downlink_power_dbm = 14.0;
};

struct NetworkServerStats {
  std::uint64_t frames_received = 0;  // every gateway copy
  std::uint64_t uplinks = 0;          // unique, accepted data uplinks
  std::uint64_t duplicates = 0;
  std::uint64_t mic_failures = 0;
  std::uint64_t replays = 0;
  std::uint64_t unknown_devices = 0;
  std::uint64_t malformed = 0;
  std::uint64_t joins = 0;
  std::uint64_t downlinks = 0;
  std::uint64_t downlinks_deferred = 0;  // no free gateway slot in either window
};

struct UplinkRecord {
  sim::SimTime time;  // end of reception
  std::uint32_t dev_addr = 0;
  std::uint32_t fcnt = 0;
  bool confirmed = false;
  std::optional<std::uint8_t> fport;
  std::vector<std::uint8_t> payload;
  std::size_t gateway_count = 0;
  std::string best_gateway;
  double best_rssi_dbm = 0.0;
  double best_snr_db = 0.0;
};

/// Read-only view of a device's server-side state.
struct DeviceState {
  DeviceClass device_class = DeviceClass::A;
  bool activated = false;
  std::uint32_t dev_addr = 0;
  std::optional<std::uint32_t> last_fcnt_up;
  std::uint32_t fcnt_down = 0;  // next downlink counter
  std::size_t queued_downlinks = 0;
  std::string best_gateway;
  std::optional<DevStatusAns> dev_status;
  std::optional<LinkAdrAns> link_adr;
};

/// Single logical network server: join handling, deduplication, MIC and counter checks,
/// application dispatch and downlink scheduling over the attached gateways.
class NetworkServer {
 public:
  explicit NetworkServer(sim::Kernel& kernel, NetworkServerConfig config = {});
  ~NetworkServer();
  NetworkServer(const NetworkServer&) = delete;
  NetworkServer& operator=(const NetworkServer&) = delete;

  sim::Kernel& kernel() { return *kernel_; }
  const NetworkServerConfig& config() const { return config_; }

  /// Returns a handle usable for multicast membership. Duplicate dev_eui is an error.
  std::size_t register_otaa_device(std::uint64_t app_eui, std::uint64_t dev_eui, const Key& app_key,
                                   DeviceClass device_class = DeviceClass::A);
  std::size_t register_abp_device(std::uint32_t dev_addr, const Key& nwk_skey, const Key& app_skey,
                                  DeviceClass device_class = DeviceClass::A);
  void register_application(std::shared_ptr<Application> app);
  void register_multicast_group(const MulticastGroup& group, std::vector<std::size_t> members = {});
  void add_multicast_member(std::uint32_t mc_addr, std::size_t device);

  /// Class A: sent in the next uplink's receive windows. Class C: sent now on RX2 parameters.
  /// Throws ArgumentError for an unknown dev_addr or a port outside 1..223.
  void queue_downlink(std::uint32_t dev_addr, int fport, std::vector<std::uint8_t> payload, bool confirmed = false);
  /// Request piggybacked in the next downlink's FOpts (LinkADRReq, DevStatusReq).
  void queue_mac_command(std::uint32_t dev_addr, const MacCommand& cmd);
  /// One frame per distinct best gateway of the group's members (all gateways if none known).
  void send_multicast(std::uint32_t mc_addr, int fport, std::vector<std::uint8_t> payload);
  void set_device_class(std::uint32_t dev_addr, DeviceClass device_class);

  std::optional<DeviceState> device(std::uint32_t dev_addr) const;
  std::optional<DeviceState> device_by_eui(std::uint64_t dev_eui) const;
  const NetworkServerStats& stats() const { return stats_; }
  const std::vector<UplinkRecord>& uplinks() const { return uplinks_; }
  const std::vector<Gateway*>& gateways() const { return gateways_; }

  // Gateway interface.
  void attach_gateway(Gateway* gw);
  void detach_gateway(Gateway* gw);
  void on_uplink(Gateway& gw, const phy::Reception& rx);

 private:
  struct QueuedDownlink {
    std::uint8_t fport = 0;
    std::vector<std::uint8_t> payload;
    bool confirmed = false;
  };

  struct Session {
    std::uint32_t dev_addr = 0;
    Key nwk_skey{};
    Key app_skey{};
    std::optional<std::uint32_t> last_fcnt_up;
    std::uint32_t fcnt_down = 0;
    std::deque<QueuedDownlink> queue;
    std::vector<MacCommand> mac_pending;
    bool need_ack = false;
    bool processing = false;
    std::string best_gateway;
    std::optional<DevStatusAns> dev_status;
    std::optional<LinkAdrAns> link_adr;
  };

  struct Record {
    DeviceClass device_class = DeviceClass::A;
    bool otaa = false;
    std::uint64_t app_eui = 0;
    std::uint64_t dev_eui = 0;
    Key app_key{};
    std::set<std::uint16_t> used_nonces;
    std::optional<Session> session;
  };

  struct Copy {
    std::string gateway;
    double rssi_dbm = 0.0;
    double snr_db = 0.0;
  };

  struct Pending {
    sim::SimTime first_seen;
    std::vector<std::uint8_t> wire;
    phy::RadioConfig uplink;
    std::vector<Copy> copies;
    bool processed = false;
  };

  using DedupKey = std::tuple<std::uint64_t, std::uint32_t, Mic>;

  sim::Task<> process(DedupKey key);
  void handle_join(Pending& p);
  sim::Task<> handle_data(Pending& p);
  void schedule_class_a(Record& rec, const Pending& p);
  void flush_class_c(Record& rec);
  std::vector<std::uint8_t> build_downlink(Session& s);
  static bool has_downlink(const Session& s);
  Gateway* gateway_by_id(const std::string& id) const;
  Gateway* best_gateway_for(const Session& s) const;
  Record* by_addr(std::uint32_t dev_addr);
  const Record* by_addr(std::uint32_t dev_addr) const;
  DeviceState view(const Record& rec) const;
  void prune_dedup();

  sim::Kernel* kernel_;
  NetworkServerConfig config_;
  sim::Rng rng_;
  std::deque<Record> devices_;
  std::map<std::uint32_t, std::size_t> addr_index_;
  ApplicationRegistry apps_;
  struct Group {
    MulticastGroup group;
    std::vector<std::size_t> members;
  };
  std::map<std::uint32_t, Group> groups_;
  std::vector<Gateway*> gateways_;
  std::map<DedupKey, Pending> dedup_;
  std::uint32_t next_nwk_addr_ = 1;
  NetworkServerStats stats_;
  std::vector<UplinkRecord> uplinks_;
};

}  // namespace lorasim::lorawan
