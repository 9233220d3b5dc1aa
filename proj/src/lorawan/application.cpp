#include "lorasim/lorawan/application.hpp"

#include <string>

namespace lorasim::lorawan {

sim::Task<> Application::on_uplink(std::uint32_t, std::vector<std::uint8_t>) { co_return; }
sim::Task<> Application::on_downlink(std::vector<std::uint8_t>) { co_return; }

sim::Task<> CallbackApplication::on_uplink(std::uint32_t dev_addr, std::vector<std::uint8_t> payload) {
  if (on_up_) on_up_(dev_addr, payload);
  co_return;
}

sim::Task<> CallbackApplication::on_downlink(std::vector<std::uint8_t> payload) {
  if (on_down_) on_down_(payload);
  co_return;
}

void ApplicationRegistry::add(std::shared_ptr<Application> app) {
  if (!app) throw ArgumentError("null application");
  const int port = app->port();
  if (port < 1 || port > 223) {
    throw ArgumentError("application port " + std::to_string(port) + " outside 1..223");
  }
  if (!apps_.emplace(port, std::move(app)).second) {
    throw RegistrationError("port " + std::to_string(port) + " already has an application");
  }
}

Application* ApplicationRegistry::find(int port) const {
  auto it = apps_.find(port);
  return it == apps_.end() ? nullptr : it->second.get();
}

}  // namespace lorasim::lorawan
