#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "lorasim/errors.hpp"
#include "lorasim/sim/task.hpp"

namespace lorasim::lorawan {

/// FPort-bound application. Server-side apps receive uplinks, device-side apps downlinks.
class Application {
 public:
  virtual ~Application() = default;
  virtual int port() const = 0;
  virtual sim::Task<> on_uplink(std::uint32_t dev_addr, std::vector<std::uint8_t> payload);
  virtual sim::Task<> on_downlink(std::vector<std::uint8_t> payload);
};

/// Wraps plain callbacks; either may be empty.
class CallbackApplication : public Application {
 public:
  using UplinkFn = std::function<void(std::uint32_t, const std::vector<std::uint8_t>&)>;
  using DownlinkFn = std::function<void(const std::vector<std::uint8_t>&)>;

  CallbackApplication(int port, UplinkFn on_up, DownlinkFn on_down = {})
      : port_(port), on_up_(std::move(on_up)), on_down_(std::move(on_down)) {}

  int port() const override { return port_; }
  sim::Task<> on_uplink(std::uint32_t dev_addr, std::vector<std::uint8_t> payload) override;
  sim::Task<> on_downlink(std::vector<std::uint8_t> payload) override;

 private:
  int port_;
  UplinkFn on_up_;
  DownlinkFn on_down_;
};

class RegistrationError : public StateError {
 public:
  using StateError::StateError;
};

class ApplicationRegistry {
 public:
  /// Throws ArgumentError for ports outside 1..223 and RegistrationError for an occupied port.
  void add(std::shared_ptr<Application> app);
  Application* find(int port) const;
  std::size_t size() const { return apps_.size(); }

 private:
  std::map<int, std::shared_ptr<Application>> apps_;
};

}  // namespace lorasim::lorawan
