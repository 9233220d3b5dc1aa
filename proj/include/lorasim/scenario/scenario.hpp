#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lorasim/errors.hpp"
#include "lorasim/lorawan/crypto.hpp"
#include "lorasim/lorawan/session.hpp"
#include "lorasim/phy/collision.hpp"
#include "lorasim/phy/link_budget.hpp"
#include "lorasim/phy/types.hpp"

namespace lorasim::scenario {

inline constexpr int kScenarioVersion = 1;

/// Schema violation. `path()` points at the offending field, e.g. "devices[2].traffic.fport".
class ScenarioError : public ArgumentError {
 public:
  ScenarioError(std::string path, const std::string& message)
      : ArgumentError(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Activation { otaa, abp };

struct GatewaySpec {
  std::string id;
  phy::Location location;
  friend bool operator==(const GatewaySpec&, const GatewaySpec&) = default;
};

/// Periodic uplinks. Uplink k goes out at anchor + k * period_s + U[0, jitter_s), where the
/// anchor is the activation time; a late slot is sent as soon as the previous one finishes.
struct TrafficSpec {
  double period_s = 60.0;
  int fport = 1;
  std::vector<std::uint8_t> payload;
  bool confirmed = false;
  double jitter_s = 0.0;
  friend bool operator==(const TrafficSpec&, const TrafficSpec&) = default;
};

struct FirmwareSpec {
  std::filesystem::path path;
  std::string entry = "firmware_main";
  double watchdog_s = 10.0;
  friend bool operator==(const FirmwareSpec&, const FirmwareSpec&) = default;
};

struct DeviceSpec {
  std::string id;
  phy::Location location;
  lorawan::DeviceClass device_class = lorawan::DeviceClass::A;
  Activation activation = Activation::otaa;
  lorawan::OtaaCredentials otaa;
  lorawan::AbpCredentials abp;
  /// Activation (join or first ABP uplink) happens no earlier than this.
  double start_s = 0.0;
  int sf = 7;
  double tx_power_dbm = 14.0;
  std::uint32_t frequency_hz = 868'100'000;
  std::optional<TrafficSpec> traffic;
  /// A firmware-backed node: the module drives a bare radio and the LoRaWAN fields are unused.
  std::optional<FirmwareSpec> firmware;
  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

/// Server-side application answering uplinks on `fport` with `reply`, either to every
/// uplink or only to those whose payload equals `match`.
struct ApplicationSpec {
  int fport = 1;
  std::optional<std::vector<std::uint8_t>> match;
  std::vector<std::uint8_t> reply;
  friend bool operator==(const ApplicationSpec&, const ApplicationSpec&) = default;
};

struct MulticastSend {
  double at_s = 0.0;
  int fport = 1;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const MulticastSend&, const MulticastSend&) = default;
};

struct MulticastSpec {
  std::uint32_t mc_addr = 0;
  lorawan::Key mc_nwk_skey{};
  lorawan::Key mc_app_skey{};
  std::vector<std::string> members;
  std::vector<MulticastSend> sends;
  friend bool operator==(const MulticastSpec&, const MulticastSpec&) = default;
};

struct PhySpec {
  phy::PathLossParams path_loss;
  phy::CollisionParams collision;
  friend bool operator==(const PhySpec&, const PhySpec&) = default;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  double length_s = 3600.0;
  double tick_s = 1e-6;
  std::uint32_t net_id = 0x000013;
  PhySpec phy;
  std::vector<GatewaySpec> gateways;
  std::vector<DeviceSpec> devices;
  std::vector<ApplicationSpec> applications;
  std::vector<MulticastSpec> multicast_groups;
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// Parses a JSON scenario. Missing fields take their defaults, unknown keys are rejected and
/// every error names the offending field. Relative firmware paths are resolved against `base_dir`.
ScenarioSpec parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
/// Reads and parses a scenario file; relative firmware paths resolve against its directory.
ScenarioSpec load_scenario(const std::filesystem::path& file);
/// Checks the cross-field invariants (unique ids, known multicast members, value ranges).
void validate(const ScenarioSpec& spec);
/// Canonical JSON text with every field spelled out.
std::string render_scenario(const ScenarioSpec& spec);

}  // namespace lorasim::scenario
