#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lorasim/firmware/elf_imports.hpp"
#include "lorasim/firmware/firmware.hpp"
#include "lorasim/hex.hpp"
#include "lorasim/log.hpp"
#include "lorasim/lorawan/crypto.hpp"
#include "lorasim/phy/airtime.hpp"
#include "lorasim/scenario/runner.hpp"
#include "lorasim/scenario/scenario.hpp"

namespace py = pybind11;
using namespace lorasim;

namespace {

py::bytes as_bytes(const std::vector<std::uint8_t>& v) { return {reinterpret_cast<const char*>(v.data()), v.size()}; }

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  std::string_view s = b;
  return {s.begin(), s.end()};
}

double seconds(sim::SimTime t, double tick) { return static_cast<double>(t.ticks) * tick; }

py::list packets(const scenario::RunOutputs& out) {
  py::list rows;
  for (const auto& p : out.phy_packets) {
    py::dict d;
    d["time_s"] = seconds(p.time, out.tick_s);
    d["sender_id"] = p.sender_id;
    d["frequency_hz"] = p.frequency_hz;
    d["sf"] = p.sf;
    d["bw_hz"] = p.bw_hz;
    d["cr"] = p.cr;
    d["preamble_symbols"] = p.preamble_symbols;
    d["airtime_s"] = p.airtime_s;
    d["tx_power_dbm"] = p.tx_power_dbm;
    d["tx_x_m"] = p.tx_location.x;
    d["tx_y_m"] = p.tx_location.y;
    d["payload"] = as_bytes(p.payload);
    rows.append(d);
  }
  return rows;
}

py::list receptions(const scenario::RunOutputs& out) {
  py::list rows;
  for (const auto& r : out.radio_receptions) {
    py::dict d;
    d["time_s"] = seconds(r.time, out.tick_s);
    d["radio_id"] = r.radio_id;
    d["sender_id"] = r.sender_id;
    d["rssi_dbm"] = r.rssi_dbm;
    d["snr_db"] = r.snr_db;
    d["delivered"] = r.delivered;
    d["collided"] = r.collided;
    d["preamble_missed"] = r.preamble_missed;
    d["interrupted"] = r.interrupted;
    rows.append(d);
  }
  return rows;
}

py::list energy_rows(const scenario::RunOutputs& out) {
  py::list rows;
  for (const auto& e : out.energy_events) {
    py::dict d;
    d["time_s"] = seconds(e.time, out.tick_s);
    d["radio_id"] = e.radio_id;
    d["power_w"] = e.power_w;
    d["cumulative_j"] = e.cumulative_j;
    rows.append(d);
  }
  return rows;
}

py::list frames(const scenario::RunOutputs& out) {
  py::list rows;
  for (const auto& f : out.app_frames) {
    py::dict d;
    d["time_s"] = seconds(f.time, out.tick_s);
    d["device_id"] = f.device_id;
    d["direction"] = f.direction == scenario::AppFrame::Direction::uplink ? "uplink" : "downlink";
    d["fport"] = f.fport ? py::object(py::int_(*f.fport)) : py::none();
    d["payload"] = as_bytes(f.payload);
    rows.append(d);
  }
  return rows;
}

py::list summary_rows(const scenario::RunOutputs& out) {
  py::list rows;
  for (const auto& s : out.summary) {
    py::dict d;
    d["id"] = s.id;
    d["sent"] = s.sent;
    d["delivered"] = s.delivered;
    d["pdr"] = s.pdr;
    d["mean_snr_db"] = s.mean_snr_db ? py::object(py::float_(*s.mean_snr_db)) : py::none();
    d["energy_j"] = s.energy_j;
    d["activated_at_s"] = s.activated_at_s ? py::object(py::float_(*s.activated_at_s)) : py::none();
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LoRa/LoRaWAN discrete-event simulator";

  auto base = py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<scenario::ScenarioError>(m, "ScenarioError", base.ptr());
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<firmware::FirmwareLoadError>(m, "FirmwareLoadError", PyExc_RuntimeError);
  py::register_exception<firmware::FirmwareFault>(m, "FirmwareFault", PyExc_RuntimeError);
  py::register_exception<scenario::IoError>(m, "IoError", PyExc_OSError);

  py::class_<scenario::ScenarioSpec>(m, "Scenario")
      .def_readwrite("seed", &scenario::ScenarioSpec::seed)
      .def_readwrite("length_s", &scenario::ScenarioSpec::length_s)
      .def_readwrite("tick_s", &scenario::ScenarioSpec::tick_s)
      .def_property_readonly("gateway_ids",
                             [](const scenario::ScenarioSpec& s) {
                               std::vector<std::string> ids;
                               for (const auto& g : s.gateways) ids.push_back(g.id);
                               return ids;
                             })
      .def_property_readonly("device_ids",
                             [](const scenario::ScenarioSpec& s) {
                               std::vector<std::string> ids;
                               for (const auto& d : s.devices) ids.push_back(d.id);
                               return ids;
                             })
      .def("render", &scenario::render_scenario, "Canonical JSON with every default spelled out.")
      .def("__eq__", [](const scenario::ScenarioSpec& a, const scenario::ScenarioSpec& b) { return a == b; });

  py::class_<scenario::RunOutputs>(m, "RunOutputs")
      .def_property_readonly("phy_packets", &packets)
      .def_property_readonly("radio_receptions", &receptions)
      .def_property_readonly("energy_events", &energy_rows)
      .def_property_readonly("app_frames", &frames)
      .def_property_readonly("summary", &summary_rows)
      .def_readonly("events", &scenario::RunOutputs::events)
      .def("export", &scenario::export_tables, py::arg("directory"),
           "Writes phy_packets.csv, radio_receptions.csv and energy_events.csv.")
      .def("csv", [](const scenario::RunOutputs& out) {
        auto docs = scenario::render_tables(out);
        return py::make_tuple(docs[0], docs[1], docs[2]);
      });

  m.def("parse_scenario", &scenario::parse_scenario, py::arg("text"), py::arg("base_dir") = std::filesystem::path());
  m.def("load_scenario", &scenario::load_scenario, py::arg("path"));
  m.def("run_scenario", &scenario::run_scenario, py::arg("scenario"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "time_on_air",
      [](std::size_t payload_len, int sf, std::uint32_t bw_hz, int cr, int preamble_symbols, bool explicit_header,
         bool crc_on) {
        phy::RadioConfig cfg;
        cfg.sf = sf;
        cfg.bw_hz = bw_hz;
        cfg.cr = cr;
        cfg.preamble_symbols = preamble_symbols;
        cfg.explicit_header = explicit_header;
        cfg.crc_on = crc_on;
        cfg.validate();
        return phy::airtime(cfg.normalized(), payload_len).total_s;
      },
      py::arg("payload_len"), py::arg("sf") = 7, py::arg("bw_hz") = 125'000, py::arg("cr") = 1,
      py::arg("preamble_symbols") = 8, py::arg("explicit_header") = true, py::arg("crc_on") = true,
      "Seconds on air; low data rate optimisation is applied where the symbol time requires it.");

  m.def(
      "aes_cmac",
      [](const py::bytes& key, const py::bytes& message) {
        auto k = from_bytes(key);
        if (k.size() != 16) throw ArgumentError("key must be 16 bytes");
        lorawan::Key kk{};
        std::copy(k.begin(), k.end(), kk.begin());
        auto msg = from_bytes(message);
        auto tag = lorawan::aes_cmac(kk, msg);
        return as_bytes({tag.begin(), tag.end()});
      },
      py::arg("key"), py::arg("message"));

  m.def("set_log_level", &log::set_level, py::arg("module"), py::arg("level"));
}
