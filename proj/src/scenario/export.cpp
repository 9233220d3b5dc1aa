#include <fstream>
#include <string_view>
#include <system_error>

#include "lorasim/hex.hpp"
#include "lorasim/scenario/runner.hpp"
#include "spdlog/fmt/fmt.h"

namespace lorasim::scenario {

namespace {

struct Row {
  std::string text;
  bool empty = true;
};

// RFC 4180: quote fields holding a separator, quote or line break; double embedded quotes.
void field(Row& row, std::string_view v) {
  if (!row.empty) row.text += ',';
  row.empty = false;
  std::string& line = row.text;
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) {
    line += v;
    return;
  }
  line += '"';
  for (char c : v) {
    if (c == '"') line += '"';
    line += c;
  }
  line += '"';
}

void field(Row& line, double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  field(line, fmt::format("{:.6g}", v));
}

void field(Row& line, std::uint64_t v) { field(line, std::to_string(v)); }
void field(Row& line, int v) { field(line, std::to_string(v)); }
void field(Row& line, bool v) { field(line, v ? std::string_view("true") : std::string_view("false")); }

void finish(std::string& doc, Row& row) {
  doc += row.text;
  doc += '\n';
  row = Row{};
}

std::string packets_csv(const RunOutputs& out) {
  std::string doc =
      "time_s,sender_id,frequency_hz,sf,bw_hz,cr,preamble_symbols,airtime_s,tx_power_dbm,tx_x_m,tx_y_m,payload_hex\n";
  Row line;
  for (const auto& p : out.phy_packets) {
    field(line, static_cast<double>(p.time.ticks) * out.tick_s);
    field(line, std::string_view(p.sender_id));
    field(line, std::uint64_t{p.frequency_hz});
    field(line, p.sf);
    field(line, std::uint64_t{p.bw_hz});
    field(line, p.cr);
    field(line, p.preamble_symbols);
    field(line, p.airtime_s);
    field(line, p.tx_power_dbm);
    field(line, p.tx_location.x);
    field(line, p.tx_location.y);
    field(line, std::string_view(to_hex(p.payload)));
    finish(doc, line);
  }
  return doc;
}

std::string receptions_csv(const RunOutputs& out) {
  std::string doc = "time_s,radio_id,sender_id,rssi_dbm,snr_db,delivered,collided,preamble_missed,interrupted\n";
  Row line;
  for (const auto& r : out.radio_receptions) {
    field(line, static_cast<double>(r.time.ticks) * out.tick_s);
    field(line, std::string_view(r.radio_id));
    field(line, std::string_view(r.sender_id));
    field(line, r.rssi_dbm);
    field(line, r.snr_db);
    field(line, r.delivered);
    field(line, r.collided);
    field(line, r.preamble_missed);
    field(line, r.interrupted);
    finish(doc, line);
  }
  return doc;
}

std::string energy_csv(const RunOutputs& out) {
  std::string doc = "time_s,radio_id,power_w,cumulative_j\n";
  Row line;
  for (const auto& e : out.energy_events) {
    field(line, static_cast<double>(e.time.ticks) * out.tick_s);
    field(line, std::string_view(e.radio_id));
    field(line, e.power_w);
    field(line, e.cumulative_j);
    finish(doc, line);
  }
  return doc;
}

}  // namespace

std::vector<std::string> render_tables(const RunOutputs& out) {
  return {packets_csv(out), receptions_csv(out), energy_csv(out)};
}

std::vector<std::filesystem::path> export_tables(const RunOutputs& out, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());

  const char* names[] = {"phy_packets.csv", "radio_receptions.csv", "energy_events.csv"};
  auto docs = render_tables(out);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto path = directory / names[i];
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << docs[i];
    f.close();
    if (!f) throw IoError("write failed for " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace lorasim::scenario
