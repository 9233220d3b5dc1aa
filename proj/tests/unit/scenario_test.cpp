#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "lorasim/firmware/elf_imports.hpp"
#include "lorasim/hex.hpp"
#include "lorasim/scenario/runner.hpp"
#include "lorasim/scenario/scenario.hpp"

using namespace lorasim::scenario;

namespace {

std::string ping_pong_path() { return std::string(LORASIM_SCENARIO_DIR) + "/ping_pong.json"; }

ScenarioError parse_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e;
  }
  FAIL("expected a scenario error for: " << text);
  return ScenarioError("", "");
}

// Minimal CSV reader good enough for the exported tables (handles quoted fields).
std::vector<std::vector<std::string>> read_csv(const std::string& doc) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    char c = doc[i];
    if (quoted) {
      if (c == '"' && i + 1 < doc.size() && doc[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(cell);
      cell.clear();
    } else if (c == '\n') {
      row.push_back(cell);
      rows.push_back(row);
      row.clear();
      cell.clear();
    } else {
      cell += c;
    }
  }
  return rows;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lorasim_scenario_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ScenarioSpec random_spec(std::mt19937_64& g) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); };
  auto n = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); };
  auto bytes = [&](int max) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(n(0, max)));
    for (auto& x : b) x = static_cast<std::uint8_t>(n(0, 255));
    return b;
  };
  auto key = [&] {
    lorasim::lorawan::Key k{};
    for (auto& x : k) x = static_cast<std::uint8_t>(n(0, 255));
    return k;
  };
  ScenarioSpec s;
  s.seed = g();
  s.length_s = u(0, 1e5);
  s.tick_s = n(0, 1) ? 1e-6 : u(1e-7, 1e-3);
  s.net_id = static_cast<std::uint32_t>(n(0, 0xffffff));
  s.phy.path_loss.pl0_db = u(100, 140);
  s.phy.path_loss.gamma = u(1.5, 4);
  s.phy.path_loss.sigma_db = u(0, 8);
  s.phy.collision.capture_threshold_db = u(0, 10);
  s.phy.collision.critical_preamble_symbols = n(0, 8);
  s.phy.collision.sensitivity_dbm[125'000][3] = u(-140, -120);
  for (int i = 0, c = n(0, 3); i < c; ++i) s.gateways.push_back({"gw" + std::to_string(i), {u(-1e3, 1e3), u(-1e3, 1e3), u(0, 30)}});
  for (int i = 0, c = n(0, 5); i < c; ++i) {
    DeviceSpec d;
    d.id = "dev,\"" + std::to_string(i);
    d.location = {u(-1e3, 1e3), u(-1e3, 1e3), 0};
    d.device_class = n(0, 1) ? lorasim::lorawan::DeviceClass::C : lorasim::lorawan::DeviceClass::A;
    d.activation = n(0, 1) ? Activation::abp : Activation::otaa;
    // only the chosen activation's fields are rendered; the other side keeps its defaults
    d.otaa = {0, static_cast<std::uint64_t>(i) + 1, lorasim::lorawan::key_from_hex("2b7e151628aed2a6abf7158809cf4f3c")};
    d.abp = {0x26000000u + static_cast<std::uint32_t>(i) + 1,
             lorasim::lorawan::key_from_hex("000102030405060708090a0b0c0d0e0f"),
             lorasim::lorawan::key_from_hex("f0e0d0c0b0a090807060504030201000")};
    if (d.activation == Activation::otaa) {
      d.otaa = {g(), 1000u + static_cast<std::uint64_t>(i), key()};
    } else {
      d.abp = {0x01000000u + static_cast<std::uint32_t>(i), key(), key()};
    }
    d.start_s = u(0, 100);
    d.sf = n(7, 12);
    d.tx_power_dbm = u(2, 20);
    d.frequency_hz = static_cast<std::uint32_t>(n(863'000'000, 870'000'000));
    if (n(0, 1)) d.traffic = TrafficSpec{u(1, 3600), n(1, 223), bytes(50), n(0, 1) == 1, u(0, 10)};
    s.devices.push_back(std::move(d));
  }
  for (int i = 0, c = n(0, 2); i < c; ++i) {
    ApplicationSpec a;
    a.fport = 10 + i;
    if (n(0, 1)) a.match = bytes(8);
    a.reply = bytes(20);
    s.applications.push_back(std::move(a));
  }
  if (!s.devices.empty() && n(0, 1)) {
    MulticastSpec m;
    m.mc_addr = static_cast<std::uint32_t>(g());
    m.mc_nwk_skey = key();
    m.mc_app_skey = key();
    m.members.push_back(s.devices[0].id);
    m.sends.push_back({u(0, 100), n(1, 223), bytes(30)});
    s.multicast_groups.push_back(std::move(m));
  }
  return s;
}

}  // namespace

TEST_CASE("a minimal scenario is filled with the documented defaults") {
  auto s = parse_scenario(R"({"version": 1, "gateways": [{"id": "gw", "location": [0, 0]}],
                              "devices": [{"id": "node", "location": [10, 20, 3]}]})");
  CHECK(s.seed == 0);
  CHECK(s.length_s == 3600.0);
  CHECK(s.tick_s == 1e-6);
  CHECK(s.net_id == 0x13);
  CHECK(s.phy == PhySpec{});
  REQUIRE(s.devices.size() == 1);
  const auto& d = s.devices[0];
  CHECK(d.location == lorasim::phy::Location{10, 20, 3});
  CHECK(d.device_class == lorasim::lorawan::DeviceClass::A);
  CHECK(d.activation == Activation::otaa);
  CHECK(d.otaa.dev_eui == 1);
  CHECK(lorasim::to_hex(d.otaa.app_key) == "2b7e151628aed2a6abf7158809cf4f3c");
  CHECK(d.sf == 7);
  CHECK(d.tx_power_dbm == 14.0);
  CHECK(d.frequency_hz == 868'100'000u);
  CHECK_FALSE(d.traffic.has_value());
  CHECK_FALSE(d.firmware.has_value());
  CHECK(s.gateways[0].location == lorasim::phy::Location{0, 0, 0});
}

TEST_CASE("schema violations name the offending field") {
  auto dup = parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0]}, {"id": "n", "location": [1, 0]}]})");
  CHECK(dup.path() == "devices[1].id");
  CHECK(std::string(dup.what()).find("'n'") != std::string::npos);

  auto odd = parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0],
                             "traffic": {"period_s": 10, "payload_hex": "abc"}}]})");
  CHECK(odd.path() == "devices[0].traffic.payload_hex");
  CHECK(std::string(odd.what()).find("odd length") != std::string::npos);

  CHECK(parse_error(R"({"version": 1, "sede": 3})").path() == "sede");
  CHECK(parse_error(R"({"version": 1, "phy": {"path_loss": {"gamma": -1}}})").path() == "phy.path_loss.gamma");
  CHECK(parse_error(R"({"seed": 1})").path() == "version");
  CHECK(parse_error(R"({"version": 2})").path() == "version");
  CHECK(parse_error(R"({"version": 1, "gateways": [{"id": "g", "location": [0]}]})").path() == "gateways[0].location");
  CHECK(parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0], "sf": 13}]})").path() == "devices[0].sf");
  CHECK(parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0], "dev_addr": "26000001"}]})").path() ==
        "devices[0].dev_addr");
  CHECK(parse_error(R"({"version": 1, "gateways": [{"id": "x", "location": [0, 0]}],
                        "devices": [{"id": "x", "location": [0, 0]}]})")
            .path() == "devices[0].id");
  CHECK(parse_error(R"({"version": 1, "multicast_groups": [{"mc_addr": "2e000001",
        "mc_nwk_skey": "11111111111111111111111111111111", "mc_app_skey": "22222222222222222222222222222222",
        "members": ["ghost"]}]})")
            .path() == "multicast_groups[0].members[0]");
  CHECK(parse_error(R"({"version": 1, "applications": [{"fport": 224, "reply_hex": ""}]})").path() == "applications[0].fport");
  CHECK(parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0], "app_key": "00"}]})").path() ==
        "devices[0].app_key");
  CHECK(parse_error("{not json").path().empty());
  const std::string big(2 * 243, 'a');
  CHECK(parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0], "traffic": {"period_s": 1, "payload_hex": ")" +
                    big + R"("}}]})")
            .path() == "devices[0].traffic.payload_hex");
}

TEST_CASE("parse(render(spec)) == spec for generated specs") {
  std::mt19937_64 g(7);
  for (int i = 0; i < 300; ++i) {
    ScenarioSpec s = random_spec(g);
    REQUIRE_NOTHROW(validate(s));
    const auto text = render_scenario(s);
    ScenarioSpec back = parse_scenario(text);
    REQUIRE(back == s);
    CHECK(render_scenario(back) == text);
  }
}

TEST_CASE("the bundled ping-pong scenario joins, then exchanges pings and pongs") {
  auto spec = load_scenario(ping_pong_path());
  auto out = run_scenario(spec);
  REQUIRE(out.summary.size() == 1);
  REQUIRE(out.summary[0].activated_at_s.has_value());
  const double joined = *out.summary[0].activated_at_s;
  int pings = 0;
  int pongs = 0;
  double first_ping = 1e9;
  double last_ping = -1;
  for (const auto& f : out.app_frames) {
    const double t = static_cast<double>(f.time.ticks) * out.tick_s;
    if (f.direction == AppFrame::Direction::uplink && f.payload == std::vector<std::uint8_t>{'p', 'i', 'n', 'g'}) {
      ++pings;
      first_ping = std::min(first_ping, t);
      last_ping = t;
    }
    if (f.direction == AppFrame::Direction::downlink && f.payload == std::vector<std::uint8_t>{'p', 'o', 'n', 'g'}) {
      ++pongs;
      REQUIRE(last_ping >= 0);
      CHECK(t - last_ping < 5.0);
    }
  }
  CHECK(pings >= 3);
  CHECK(pongs >= 3);
  CHECK(joined < first_ping);
  CHECK(out.summary[0].pdr == 1.0);
}

TEST_CASE("equal seeds export identical bytes and a new seed changes a stochastic field") {
  auto spec = load_scenario(ping_pong_path());
  auto a = render_tables(run_scenario(spec));
  auto b = render_tables(run_scenario(spec));
  CHECK(a == b);
  spec.seed += 1;
  auto c = render_tables(run_scenario(spec));
  CHECK(a[0] != c[0]);  // the join request carries a random DevNonce
}

TEST_CASE("two equidistant devices transmitting together both collide at the gateway") {
  auto spec = parse_scenario(R"({"version": 1, "length_s": 20,
    "gateways": [{"id": "gw", "location": [0, 0]}],
    "devices": [
      {"id": "east", "location": [60, 0], "activation": "abp", "start_s": 5, "traffic": {"period_s": 1000}},
      {"id": "west", "location": [-60, 0], "activation": "abp", "start_s": 5, "traffic": {"period_s": 1000}}]})");
  auto out = run_scenario(spec);
  REQUIRE(out.phy_packets.size() == 2);
  CHECK(out.phy_packets[0].time == out.phy_packets[1].time);
  int at_gw = 0;
  for (const auto& r : out.radio_receptions) {
    if (r.radio_id != "gw") continue;
    ++at_gw;
    CHECK(r.collided);
    CHECK_FALSE(r.delivered);
  }
  CHECK(at_gw == 2);
  CHECK(out.summary[0].pdr == 0.0);
}

TEST_CASE("export: headers only for an empty run") {
  auto out = run_scenario(parse_scenario(R"({"version": 1, "length_s": 10})"));
  auto dir = temp_dir("empty");
  auto files = export_tables(out, dir);
  REQUIRE(files.size() == 3);
  CHECK(slurp(dir / "phy_packets.csv") ==
        "time_s,sender_id,frequency_hz,sf,bw_hz,cr,preamble_symbols,airtime_s,tx_power_dbm,tx_x_m,tx_y_m,payload_hex\n");
  CHECK(slurp(dir / "radio_receptions.csv") ==
        "time_s,radio_id,sender_id,rssi_dbm,snr_db,delivered,collided,preamble_missed,interrupted\n");
  CHECK(slurp(dir / "energy_events.csv") == "time_s,radio_id,power_w,cumulative_j\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("export: one transmission fans out to every listener") {
  auto out = run_scenario(parse_scenario(R"({"version": 1, "length_s": 10,
    "gateways": [{"id": "g1", "location": [0, 0]}, {"id": "g,2", "location": [0, 50]}],
    "devices": [{"id": "node", "location": [40, 0], "activation": "abp", "start_s": 1, "traffic": {"period_s": 1000}}]})"));
  auto docs = render_tables(out);
  auto packets = read_csv(docs[0]);
  auto receptions = read_csv(docs[1]);
  REQUIRE(packets.size() == 2);
  REQUIRE(receptions.size() == 3);
  CHECK(packets[1][1] == "node");
  CHECK(packets[1][0] == "1");
  CHECK(packets[1][3] == "7");
  CHECK(packets[1][7] == "0.046336");  // 13-byte frame, 45.25 symbols at sf7
  CHECK(receptions[1][1] == "g1");
  CHECK(receptions[2][1] == "g,2");
  CHECK(docs[1].find("\"g,2\"") != std::string::npos);  // quoted per RFC 4180
  CHECK(receptions[1][5] == "true");
}

TEST_CASE("export: cumulative energy never decreases per radio and the summary follows from the tables") {
  auto spec = parse_scenario(R"({"version": 1, "length_s": 3600, "seed": 3,
    "phy": {"path_loss": {"sigma_db": 6}},
    "gateways": [{"id": "gw", "location": [0, 0]}],
    "devices": [
      {"id": "a", "location": [80, 0], "activation": "abp", "traffic": {"period_s": 60, "jitter_s": 60}},
      {"id": "b", "location": [0, 110], "activation": "abp", "sf": 9, "traffic": {"period_s": 90, "jitter_s": 30}},
      {"id": "c", "location": [0, -30], "class": "C", "traffic": {"period_s": 120}}]})");
  auto out = run_scenario(spec);
  auto docs = render_tables(out);

  auto energy = read_csv(docs[2]);
  std::map<std::string, double> last;
  for (std::size_t i = 1; i < energy.size(); ++i) {
    const double j = std::stod(energy[i][3]);
    auto [it, fresh] = last.emplace(energy[i][1], j);
    if (!fresh) {
      CHECK(j >= it->second);
      it->second = j;
    }
  }
  CHECK(last.size() == 4);

  // PDR recomputed from the two packet tables alone: sent rows per sender, and rows of the
  // receptions table delivered at the gateway, matched to senders by (time, sender)
  auto packets = read_csv(docs[0]);
  auto receptions = read_csv(docs[1]);
  std::map<std::string, int> sent;
  for (std::size_t i = 1; i < packets.size(); ++i) ++sent[packets[i][1]];
  std::map<std::string, std::set<std::string>> delivered;
  for (std::size_t i = 1; i < receptions.size(); ++i) {
    if (receptions[i][1] == "gw" && receptions[i][5] == "true") delivered[receptions[i][2]].insert(receptions[i][0]);
  }
  for (const auto& s : out.summary) {
    REQUIRE(sent[s.id] > 0);
    CHECK(s.sent == static_cast<std::uint64_t>(sent[s.id]));
    CHECK(s.pdr == doctest::Approx(static_cast<double>(delivered[s.id].size()) / sent[s.id]));
    CHECK(s.energy_j == doctest::Approx(last[s.id]).epsilon(1e-5));
  }
  auto again = summarize(out, {"a", "b", "c"});
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].pdr == out.summary[i].pdr);
}

TEST_CASE("export to an unwritable location raises an I/O error") {
  auto out = run_scenario(parse_scenario(R"({"version": 1, "length_s": 1})"));
  auto dir = temp_dir("blocked");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(export_tables(out, dir / "file" / "sub"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("firmware-backed devices run inside a scenario; load errors surface before the run") {
  auto spec = parse_scenario(R"({"version": 1, "length_s": 100,
    "gateways": [{"id": "gw", "location": [0, 0]}],
    "devices": [{"id": "fw-node", "location": [50, 0], "firmware": "ping.so"}]})",
                             LORASIM_FW_DIR);
  CHECK(spec.devices[0].firmware->path == std::filesystem::path(LORASIM_FW_DIR) / "ping.so");
  auto out = run_scenario(spec);
  CHECK(out.phy_packets.size() == 3);
  CHECK(out.summary[0].sent == 3);
  CHECK(out.summary[0].delivered == 3);

  spec.devices[0].firmware->path = "/nonexistent/fw.so";
  CHECK_THROWS_AS(run_scenario(spec), lorasim::firmware::FirmwareLoadError);
  CHECK(parse_error(R"({"version": 1, "devices": [{"id": "n", "location": [0, 0], "firmware": "x.so",
                        "traffic": {"period_s": 5}}]})")
            .path() == "devices[0].traffic");
}
