#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lorasim/phy/types.hpp"
#include "lorasim/scenario/scenario.hpp"
#include "lorasim/sim/time.hpp"

namespace lorasim::scenario {

struct EnergyRow {
  sim::SimTime time;
  std::string radio_id;
  std::size_t radio_index = 0;
  double power_w = 0.0;
  double cumulative_j = 0.0;
};

/// Application payload seen at one end of the link: an uplink accepted by the server or a
/// downlink handed to the device.
struct AppFrame {
  enum class Direction { uplink, downlink };
  sim::SimTime time;
  std::string device_id;
  Direction direction = Direction::uplink;
  std::optional<std::uint8_t> fport;
  std::vector<std::uint8_t> payload;
};

struct DeviceSummary {
  std::string id;
  std::uint64_t sent = 0;       // packets the device put on air
  std::uint64_t delivered = 0;  // of those, received by at least one gateway
  double pdr = 0.0;
  std::optional<double> mean_snr_db;  // over the delivered gateway receptions
  double energy_j = 0.0;
  std::optional<double> activated_at_s;
};

struct RunOutputs {
  double tick_s = 1e-6;
  double length_s = 0.0;
  std::vector<std::string> gateway_ids;
  std::vector<phy::PacketRecord> phy_packets;
  std::vector<phy::ReceptionRecord> radio_receptions;
  std::vector<EnergyRow> energy_events;
  std::vector<AppFrame> app_frames;
  std::vector<DeviceSummary> summary;
  std::uint64_t events = 0;
};

/// Builds the network described by `spec`, runs it for spec.length_s and snapshots the tables
/// when the simulation ends. Firmware load failures are raised before the run starts.
RunOutputs run_scenario(const ScenarioSpec& spec);

/// Per-device statistics recomputed from the packet, reception and energy tables.
std::vector<DeviceSummary> summarize(const RunOutputs& out, const std::vector<std::string>& device_ids);

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes phy_packets.csv, radio_receptions.csv and energy_events.csv into `directory`,
/// creating it if needed. Returns the written paths.
std::vector<std::filesystem::path> export_tables(const RunOutputs& out, const std::filesystem::path& directory);

/// The three CSV documents as strings, in the order written by export_tables.
std::vector<std::string> render_tables(const RunOutputs& out);

}  // namespace lorasim::scenario
