#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lorasim/firmware/elf_imports.hpp"
#include "lorasim/phy/radio.hpp"
#include "lorasim/sim/kernel.hpp"
#include "sim_hal_dispatch.h"

namespace lorasim::firmware {

enum class FirmwareState { loaded, running, finished, faulted };

const char* to_string(FirmwareState s);

/// Firmware crashed, threw, or ran past the watchdog without a HAL call. Ends the run.
class FirmwareFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FirmwareImage {
  std::filesystem::path path;
  std::string entry_symbol = "firmware_main";
};

class FirmwareInstance;

/// Simulator side of one HAL entry point. Runs inside the instance's kernel task while the
/// firmware thread is parked, so it may sleep or wait on the radio.
using HalHandler = std::function<sim::Task<std::int64_t>(FirmwareInstance&, SIM_HalCall&)>;

class HalBindingTable {
 public:
  /// HAL_Delay, HAL_GetTick and the SIM_Radio* trio.
  static HalBindingTable defaults();

  void bind(std::string name, HalHandler handler);
  bool contains(std::string_view name) const { return handlers_.find(name) != handlers_.end(); }
  const HalHandler* find(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, HalHandler, std::less<>> handlers_;
};

struct FirmwareOptions {
  std::string name;  // defaults to the module's file name
  /// Wall-clock seconds firmware may run between HAL calls before it is declared hung.
  double watchdog_s = 10.0;
  HalBindingTable bindings = HalBindingTable::defaults();
};

struct HalTraceEntry {
  std::string call;
  sim::SimTime requested;  // kernel time when the call reached the simulator
  sim::SimTime completed;
  std::int64_t result = 0;
};

class FirmwareInstance {
 public:
  ~FirmwareInstance();
  FirmwareInstance(const FirmwareInstance&) = delete;
  FirmwareInstance& operator=(const FirmwareInstance&) = delete;

  const std::string& name() const { return name_; }
  const FirmwareImage& image() const { return image_; }
  FirmwareState state() const { return state_; }
  std::optional<int> exit_code() const { return exit_code_; }
  /// Fault or watchdog description; empty otherwise.
  const std::string& diagnostic() const { return diagnostic_; }

  sim::Kernel& kernel() { return *kernel_; }
  phy::Radio& radio();

  /// Runs the firmware entry point in its own thread, mirrored by one kernel task.
  void start(phy::Radio& radio);
  /// Unwinds the firmware at its pending HAL call and releases the thread. Idempotent.
  void stop();

  const std::vector<HalTraceEntry>& trace() const { return trace_; }

  struct Context;  // shared with the firmware thread

 private:
  friend std::unique_ptr<FirmwareInstance> load_firmware(sim::Kernel&, const FirmwareImage&, FirmwareOptions);

  FirmwareInstance(sim::Kernel& kernel, FirmwareImage image, FirmwareOptions options, std::shared_ptr<Context> ctx);
  sim::Task<> mirror();

  sim::Kernel* kernel_;
  FirmwareImage image_;
  FirmwareOptions options_;
  std::string name_;
  std::shared_ptr<Context> ctx_;
  phy::Radio* radio_ = nullptr;
  FirmwareState state_ = FirmwareState::loaded;
  bool stopped_ = false;
  std::optional<int> exit_code_;
  std::string diagnostic_;
  std::vector<HalTraceEntry> trace_;
  sim::TaskHandle task_;
};

/// Loads a host-built firmware module and checks that its entry point exists and that every
/// HAL import has a binding. Each instance gets a private copy of the module, so firmware
/// globals are per node. Throws FirmwareLoadError naming the offending symbol.
std::unique_ptr<FirmwareInstance> load_firmware(sim::Kernel& kernel, const FirmwareImage& image,
                                                FirmwareOptions options = {});

}  // namespace lorasim::firmware
