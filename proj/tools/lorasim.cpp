#include <chrono>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lorasim/firmware/elf_imports.hpp"
#include "lorasim/firmware/firmware.hpp"
#include "lorasim/log.hpp"
#include "lorasim/scenario/runner.hpp"
#include "lorasim/scenario/scenario.hpp"
#include "spdlog/fmt/fmt.h"

namespace {

enum Exit { ok = 0, failure = 1, usage = 2, bad_scenario = 3, firmware_error = 4, io_error = 5 };

void print_summary(const lorasim::scenario::RunOutputs& out, double wall_s) {
  fmt::print("{:<16} {:>6} {:>9} {:>6} {:>13} {:>12} {:>12}\n", "device", "sent", "delivered", "pdr", "mean_snr_db",
             "energy_j", "activated_s");
  for (const auto& s : out.summary) {
    fmt::print("{:<16} {:>6} {:>9} {:>6.3f} {:>13} {:>12.6g} {:>12}\n", s.id, s.sent, s.delivered, s.pdr,
               s.mean_snr_db ? fmt::format("{:.2f}", *s.mean_snr_db) : "-", s.energy_j,
               s.activated_at_s ? fmt::format("{:.3f}", *s.activated_at_s) : "-");
  }
  fmt::print("{} packets, {} receptions, {} energy rows, {} events; {:.3f} s simulated in {:.3f} s\n",
             out.phy_packets.size(), out.radio_receptions.size(), out.energy_events.size(), out.events, out.length_s,
             wall_s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRa/LoRaWAN discrete-event simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> length;
  std::string out_dir;
  std::vector<std::string> log_levels;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run a scenario and export its tables");
  run->add_option("scenario", scenario_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--length", length, "Override the simulated length in seconds")->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Directory for phy_packets.csv, radio_receptions.csv and energy_events.csv");
  run->add_option("--log-level", log_levels, "MODULE=LEVEL, e.g. phy=debug (repeatable)");
  run->add_flag("-q,--quiet", quiet, "Do not print the summary");

  std::string check_path;
  auto* check = app.add_subcommand("check", "Validate a scenario and print it with all defaults filled in");
  check->add_option("scenario", check_path, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*check) {
      fmt::print("{}", lorasim::scenario::render_scenario(lorasim::scenario::load_scenario(check_path)));
      return ok;
    }
    for (const auto& spec : log_levels) lorasim::log::apply_spec(spec);
    auto spec = lorasim::scenario::load_scenario(scenario_path);
    if (seed) spec.seed = *seed;
    if (length) spec.length_s = *length;

    const auto t0 = std::chrono::steady_clock::now();
    auto out = lorasim::scenario::run_scenario(spec);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out_dir.empty()) lorasim::scenario::export_tables(out, out_dir);
    if (!quiet) print_summary(out, wall);
    return ok;
  } catch (const lorasim::scenario::ScenarioError& e) {
    fmt::print(stderr, "scenario error: {}\n", e.what());
    return bad_scenario;
  } catch (const lorasim::firmware::FirmwareLoadError& e) {
    fmt::print(stderr, "firmware load error: {}\n", e.what());
    return firmware_error;
  } catch (const lorasim::firmware::FirmwareFault& e) {
    fmt::print(stderr, "firmware fault: {}\n", e.what());
    return firmware_error;
  } catch (const lorasim::scenario::IoError& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return io_error;
  } catch (const lorasim::ArgumentError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return usage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return failure;
  }
}
