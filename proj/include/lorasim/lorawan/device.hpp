#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lorasim/lorawan/application.hpp"
#include "lorasim/lorawan/frame.hpp"
#include "lorasim/lorawan/mac_commands.hpp"
#include "lorasim/lorawan/region.hpp"
#include "lorasim/lorawan/session.hpp"
#include "lorasim/phy/phy_layer.hpp"
#include "lorasim/phy/radio.hpp"
#include "lorasim/sim/kernel.hpp"

namespace lorasim::lorawan {

struct DeviceConfig {
  DeviceClass device_class = DeviceClass::A;
  RxWindowParams rx{};
  /// Uplink channel, spreading factor and power. IQ is forced to normal polarity.
  phy::RadioConfig uplink{};
  energy::PowerProfile power{};
  std::uint8_t battery = 255;
  int max_confirmed_retries = 8;
  double join_backoff_s = 10.0;
  double join_backoff_max_s = 160.0;
  double join_backoff_jitter = 0.1;
};

struct DownlinkRecord {
  sim::SimTime time;
  std::uint32_t dev_addr = 0;
  std::uint32_t fcnt = 0;
  std::optional<std::uint8_t> fport;
  std::vector<std::uint8_t> payload;
  double rssi_dbm = 0.0;
  double snr_db = 0.0;
  bool multicast = false;
  bool ack = false;
};

struct DeviceStats {
  std::uint64_t transmissions = 0;  // every uplink on air, joins included
  std::uint64_t uplinks = 0;        // distinct data frames (fcnt values)
  std::uint64_t retransmissions = 0;
  std::uint64_t join_requests = 0;
  std::uint64_t downlinks = 0;
  std::uint64_t mic_failures = 0;
  std::uint64_t replays = 0;
  std::uint64_t confirmed_acked = 0;
  std::uint64_t confirmed_unacked = 0;
};

/// LoRaWAN end device (Class A or C) driving its own radio.
class Device {
 public:
  Device(phy::PhyLayer& phy, std::string id, phy::Location location, OtaaCredentials otaa, DeviceConfig config = {});
  Device(phy::PhyLayer& phy, std::string id, phy::Location location, AbpCredentials abp, DeviceConfig config = {});
  ~Device();
  Device(const Device&) = delete;
  Device& operator=(const Device&) = delete;

  const std::string& id() const { return radio_.id(); }
  phy::Radio& radio() { return radio_; }
  const phy::Radio& radio() const { return radio_; }

  bool activated() const { return session_.has_value(); }
  std::uint32_t dev_addr() const;
  std::uint32_t fcnt_up() const { return session_ ? session_->fcnt_up : 0; }
  std::optional<std::uint32_t> last_fcnt_down() const { return session_ ? session_->last_fcnt_down : std::nullopt; }
  const std::optional<SessionKeys> session_keys() const;

  DeviceClass device_class() const { return config_.device_class; }
  void set_device_class(DeviceClass c);
  const phy::RadioConfig& uplink_config() const { return config_.uplink; }
  const RxWindowParams& rx_params() const { return config_.rx; }

  /// Downlinks on the app's port are handed to it. Ports outside 1..223 raise ArgumentError,
  /// an occupied port RegistrationError.
  void register_application(std::shared_ptr<Application> app);
  void join_multicast_group(const MulticastGroup& group);
  /// Uplink MAC command (e.g. LinkCheckReq) sent with the next uplink.
  void queue_mac_command(const MacCommand& cmd);

  /// OTAA handshake, retried with backoff until an accept verifies.
  sim::Task<> join();
  /// Sends one data frame and runs its receive windows. For confirmed frames, retransmits
  /// until acknowledged or out of retries and returns whether an ACK arrived.
  sim::Task<bool> send_uplink(int fport, std::vector<std::uint8_t> payload, bool confirmed = false);

  std::optional<LinkCheckAns> last_link_check() const { return last_link_check_; }
  const std::vector<DownlinkRecord>& downlinks() const { return downlinks_; }
  const std::vector<std::uint16_t>& dev_nonces() const { return dev_nonces_; }
  const DeviceStats& stats() const { return stats_; }

 private:
  struct Session {
    std::uint32_t dev_addr = 0;
    Key nwk_skey{};
    Key app_skey{};
    std::uint32_t fcnt_up = 0;
    std::optional<std::uint32_t> last_fcnt_down;
  };
  struct Group {
    MulticastGroup keys;
    std::optional<std::uint32_t> last_fcnt;
  };

  Device(phy::PhyLayer& phy, std::string id, phy::Location location, DeviceConfig config);

  sim::Task<> pump();
  sim::Task<> handle(phy::Reception rx);
  void handle_join_accept(const std::vector<std::uint8_t>& wire);
  sim::Task<> rx_windows(sim::SimTime tx_end, phy::RadioConfig rx1, double d1, double d2, bool session_class);
  sim::Task<> window(phy::RadioConfig cfg, bool session_class);
  sim::Task<> transmit(std::vector<std::uint8_t> wire);
  void idle();
  bool class_c_active() const;
  std::uint16_t fresh_dev_nonce();

  sim::Kernel* kernel_;
  DeviceConfig config_;
  phy::Radio radio_;
  sim::Rng rng_;
  std::optional<OtaaCredentials> otaa_;
  std::optional<Session> session_;
  std::vector<Group> groups_;
  ApplicationRegistry apps_;
  std::vector<MacCommand> mac_pending_;
  std::optional<LinkCheckAns> last_link_check_;

  bool busy_ = false;
  bool joining_ = false;
  std::uint16_t join_nonce_ = 0;
  bool window_hit_ = false;
  bool acked_ = false;
  bool need_ack_ = false;

  std::set<std::uint16_t> used_nonces_;
  std::vector<std::uint16_t> dev_nonces_;
  std::vector<DownlinkRecord> downlinks_;
  DeviceStats stats_;
  sim::TaskHandle pump_task_;
};

}  // namespace lorasim::lorawan
