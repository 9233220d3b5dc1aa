#include "lorasim/scenario/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lorasim/hex.hpp"
#include "lorasim/lorawan/frame.hpp"
#include "spdlog/fmt/fmt.h"

namespace lorasim::scenario {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxAppPayload = 242;  // 255-byte PHY payload minus the smallest frame overhead
const lorawan::Key kDefaultAppKey = lorawan::key_from_hex("2b7e151628aed2a6abf7158809cf4f3c");
const lorawan::Key kDefaultNwkSKey = lorawan::key_from_hex("000102030405060708090a0b0c0d0e0f");
const lorawan::Key kDefaultAppSKey = lorawan::key_from_hex("f0e0d0c0b0a090807060504030201000");

std::string join_path(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }
std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

// An object whose keys are consumed one by one; leftovers are unknown keys.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ScenarioError(path_, "expected an object");
  }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }
  const json& need(const std::string& key) {
    const json* v = take(key);
    if (!v) throw ScenarioError(at(key), "required field is missing");
    return *v;
  }
  std::string at(const std::string& key) const { return join_path(path_, key); }

  void finish() const {
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) throw ScenarioError(at(k), "unknown key");
    }
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path, "must be finite");
  return v;
}

double number_min(const json& j, const std::string& path, double lo, bool strict) {
  const double v = number(j, path);
  if (strict ? !(v > lo) : !(v >= lo)) {
    throw ScenarioError(path, fmt::format("must be {} {}", strict ? ">" : ">=", lo));
  }
  return v;
}

std::int64_t integer(const json& j, const std::string& path, std::int64_t lo, std::int64_t hi) {
  if (!j.is_number_integer()) throw ScenarioError(path, "expected an integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
    throw ScenarioError(path, fmt::format("must lie in [{}, {}]", lo, hi));
  }
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi) throw ScenarioError(path, fmt::format("must lie in [{}, {}]", lo, hi));
  return v;
}

std::uint64_t seed_value(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw ScenarioError(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ScenarioError(path, "expected a string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ScenarioError(path, "expected true or false");
  return j.get<bool>();
}

std::vector<std::uint8_t> bytes(const json& j, const std::string& path) {
  const std::string s = text(j, path);
  if (s.size() % 2 != 0) throw ScenarioError(path, "hex string has odd length");
  try {
    return from_hex(s);
  } catch (const ArgumentError&) {
    throw ScenarioError(path, "not a hex string");
  }
}

std::uint64_t hex_number(const json& j, const std::string& path, std::size_t digits) {
  const std::string s = text(j, path);
  if (s.size() != digits) throw ScenarioError(path, fmt::format("expected {} hex digits", digits));
  std::uint64_t v = 0;
  for (char c : s) {
    int d = (c >= '0' && c <= '9')   ? c - '0'
            : (c >= 'a' && c <= 'f') ? c - 'a' + 10
            : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                     : -1;
    if (d < 0) throw ScenarioError(path, "not a hex string");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

lorawan::Key key(const json& j, const std::string& path) {
  const auto b = bytes(j, path);
  if (b.size() != 16) throw ScenarioError(path, "keys are 32 hex digits");
  lorawan::Key k{};
  std::copy(b.begin(), b.end(), k.begin());
  return k;
}

phy::Location location(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) throw ScenarioError(path, "expected [x, y] or [x, y, z] in metres");
  phy::Location l;
  l.x = number(j[0], index_path(path, 0));
  l.y = number(j[1], index_path(path, 1));
  if (j.size() == 3) l.z = number(j[2], index_path(path, 2));
  return l;
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ScenarioError(path, "expected an array");
  return j;
}

PhySpec parse_phy(const json& j, const std::string& path) {
  PhySpec p;
  Obj o(j, path);
  if (const json* pl = o.take("path_loss")) {
    Obj q(*pl, o.at("path_loss"));
    if (auto* v = q.take("pl0_db")) p.path_loss.pl0_db = number(*v, q.at("pl0_db"));
    if (auto* v = q.take("d0_m")) p.path_loss.d0_m = number_min(*v, q.at("d0_m"), 0.0, true);
    if (auto* v = q.take("gamma")) p.path_loss.gamma = number_min(*v, q.at("gamma"), 0.0, true);
    if (auto* v = q.take("sigma_db")) p.path_loss.sigma_db = number_min(*v, q.at("sigma_db"), 0.0, false);
    q.finish();
  }
  if (const json* c = o.take("collision")) {
    Obj q(*c, o.at("collision"));
    if (auto* v = q.take("capture_threshold_db")) {
      p.collision.capture_threshold_db = number_min(*v, q.at("capture_threshold_db"), 0.0, false);
    }
    if (auto* v = q.take("critical_preamble_symbols")) {
      p.collision.critical_preamble_symbols = static_cast<int>(integer(*v, q.at("critical_preamble_symbols"), 0, 65535));
    }
    if (auto* v = q.take("noise_figure_db")) p.collision.noise_figure_db = number(*v, q.at("noise_figure_db"));
    if (auto* s = q.take("sensitivity_dbm")) {
      Obj t(*s, q.at("sensitivity_dbm"));
      for (const auto& [bw_text, row] : s->items()) {
        const std::string at = t.at(bw_text);
        t.take(bw_text);
        std::uint32_t bw = 0;
        try {
          std::size_t used = 0;
          bw = static_cast<std::uint32_t>(std::stoul(bw_text, &used));
          if (used != bw_text.size()) throw std::invalid_argument(bw_text);
        } catch (const std::exception&) {
          throw ScenarioError(at, "keys are bandwidths in Hz");
        }
        if (bw != 125'000 && bw != 250'000 && bw != 500'000) throw ScenarioError(at, "unsupported bandwidth");
        if (!row.is_array() || row.size() != 6) throw ScenarioError(at, "expected six values for sf7..sf12");
        std::array<double, 6> vals{};
        for (std::size_t i = 0; i < 6; ++i) vals[i] = number(row[i], index_path(at, i));
        p.collision.sensitivity_dbm[bw] = vals;
      }
    }
    q.finish();
  }
  o.finish();
  return p;
}

TrafficSpec parse_traffic(const json& j, const std::string& path) {
  TrafficSpec t;
  Obj o(j, path);
  t.period_s = number_min(o.need("period_s"), o.at("period_s"), 0.0, true);
  if (auto* v = o.take("fport")) t.fport = static_cast<int>(integer(*v, o.at("fport"), 1, 223));
  if (auto* v = o.take("payload_hex")) t.payload = bytes(*v, o.at("payload_hex"));
  if (auto* v = o.take("confirmed")) t.confirmed = boolean(*v, o.at("confirmed"));
  if (auto* v = o.take("jitter_s")) t.jitter_s = number_min(*v, o.at("jitter_s"), 0.0, false);
  o.finish();
  return t;
}

FirmwareSpec parse_firmware(const json& j, const std::string& path, const std::filesystem::path& base_dir) {
  FirmwareSpec f;
  auto resolve = [&](std::string p) {
    std::filesystem::path fp(p);
    return fp.is_relative() && !base_dir.empty() ? base_dir / fp : fp;
  };
  if (j.is_string()) {
    f.path = resolve(j.get<std::string>());
    return f;
  }
  Obj o(j, path);
  f.path = resolve(text(o.need("path"), o.at("path")));
  if (auto* v = o.take("entry")) f.entry = text(*v, o.at("entry"));
  if (auto* v = o.take("watchdog_s")) f.watchdog_s = number_min(*v, o.at("watchdog_s"), 0.0, true);
  o.finish();
  return f;
}

DeviceSpec parse_device(const json& j, const std::string& path, std::size_t index,
                        const std::filesystem::path& base_dir) {
  DeviceSpec d;
  Obj o(j, path);
  d.id = text(o.need("id"), o.at("id"));
  d.location = location(o.need("location"), o.at("location"));
  if (auto* v = o.take("class")) {
    const auto c = text(*v, o.at("class"));
    if (c == "A") d.device_class = lorawan::DeviceClass::A;
    else if (c == "C") d.device_class = lorawan::DeviceClass::C;
    else throw ScenarioError(o.at("class"), "expected \"A\" or \"C\"");
  }
  if (auto* v = o.take("activation")) {
    const auto a = text(*v, o.at("activation"));
    if (a == "otaa") d.activation = Activation::otaa;
    else if (a == "abp") d.activation = Activation::abp;
    else throw ScenarioError(o.at("activation"), "expected \"otaa\" or \"abp\"");
  }
  // Defaults give every device distinct, reproducible credentials.
  d.otaa = {0, index + 1, kDefaultAppKey};
  d.abp = {0x26000000u + static_cast<std::uint32_t>(index) + 1, kDefaultNwkSKey, kDefaultAppSKey};
  auto otaa_only = [&](const char* k) {
    if (d.activation != Activation::otaa) throw ScenarioError(o.at(k), "only valid with otaa activation");
  };
  auto abp_only = [&](const char* k) {
    if (d.activation != Activation::abp) throw ScenarioError(o.at(k), "only valid with abp activation");
  };
  if (auto* v = o.take("app_eui")) {
    otaa_only("app_eui");
    d.otaa.app_eui = hex_number(*v, o.at("app_eui"), 16);
  }
  if (auto* v = o.take("dev_eui")) {
    otaa_only("dev_eui");
    d.otaa.dev_eui = hex_number(*v, o.at("dev_eui"), 16);
  }
  if (auto* v = o.take("app_key")) {
    otaa_only("app_key");
    d.otaa.app_key = key(*v, o.at("app_key"));
  }
  if (auto* v = o.take("dev_addr")) {
    abp_only("dev_addr");
    d.abp.dev_addr = static_cast<std::uint32_t>(hex_number(*v, o.at("dev_addr"), 8));
  }
  if (auto* v = o.take("nwk_skey")) {
    abp_only("nwk_skey");
    d.abp.nwk_skey = key(*v, o.at("nwk_skey"));
  }
  if (auto* v = o.take("app_skey")) {
    abp_only("app_skey");
    d.abp.app_skey = key(*v, o.at("app_skey"));
  }
  if (auto* v = o.take("start_s")) d.start_s = number_min(*v, o.at("start_s"), 0.0, false);
  if (auto* v = o.take("sf")) d.sf = static_cast<int>(integer(*v, o.at("sf"), 7, 12));
  if (auto* v = o.take("tx_power_dbm")) d.tx_power_dbm = number(*v, o.at("tx_power_dbm"));
  if (auto* v = o.take("frequency_hz")) {
    d.frequency_hz = static_cast<std::uint32_t>(integer(*v, o.at("frequency_hz"), 1, 0xffffffffLL));
  }
  if (auto* v = o.take("traffic")) d.traffic = parse_traffic(*v, o.at("traffic"));
  if (auto* v = o.take("firmware")) d.firmware = parse_firmware(*v, o.at("firmware"), base_dir);
  o.finish();
  return d;
}

ApplicationSpec parse_application(const json& j, const std::string& path) {
  ApplicationSpec a;
  Obj o(j, path);
  a.fport = static_cast<int>(integer(o.need("fport"), o.at("fport"), 1, 223));
  if (auto* v = o.take("match_hex")) a.match = bytes(*v, o.at("match_hex"));
  a.reply = bytes(o.need("reply_hex"), o.at("reply_hex"));
  o.finish();
  return a;
}

MulticastSpec parse_multicast(const json& j, const std::string& path) {
  MulticastSpec m;
  Obj o(j, path);
  m.mc_addr = static_cast<std::uint32_t>(hex_number(o.need("mc_addr"), o.at("mc_addr"), 8));
  m.mc_nwk_skey = key(o.need("mc_nwk_skey"), o.at("mc_nwk_skey"));
  m.mc_app_skey = key(o.need("mc_app_skey"), o.at("mc_app_skey"));
  const json& members = array(o.need("members"), o.at("members"));
  for (std::size_t i = 0; i < members.size(); ++i) m.members.push_back(text(members[i], index_path(o.at("members"), i)));
  if (auto* v = o.take("sends")) {
    const json& sends = array(*v, o.at("sends"));
    for (std::size_t i = 0; i < sends.size(); ++i) {
      Obj s(sends[i], index_path(o.at("sends"), i));
      MulticastSend send;
      send.at_s = number_min(s.need("at_s"), s.at("at_s"), 0.0, false);
      if (auto* f = s.take("fport")) send.fport = static_cast<int>(integer(*f, s.at("fport"), 1, 223));
      if (auto* p = s.take("payload_hex")) send.payload = bytes(*p, s.at("payload_hex"));
      s.finish();
      m.sends.push_back(std::move(send));
    }
  }
  o.finish();
  return m;
}

std::string hex_digits(std::uint64_t v, int digits) { return fmt::format("{:0{}x}", v, digits); }

using ojson = nlohmann::ordered_json;

ojson location_json(const phy::Location& l) { return ojson::array({l.x, l.y, l.z}); }

}  // namespace

ScenarioSpec parse_scenario(std::string_view input, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(input.begin(), input.end());
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("invalid JSON: ") + e.what());
  }
  ScenarioSpec spec;
  Obj o(root, "");
  const auto version = integer(o.need("version"), "version", std::numeric_limits<std::int64_t>::min(),
                               std::numeric_limits<std::int64_t>::max());
  if (version != kScenarioVersion) {
    throw ScenarioError("version", fmt::format("unsupported version {} (expected {})", version, kScenarioVersion));
  }
  if (auto* v = o.take("seed")) spec.seed = seed_value(*v, "seed");
  if (auto* v = o.take("length_s")) spec.length_s = number_min(*v, "length_s", 0.0, false);
  if (auto* v = o.take("tick_s")) spec.tick_s = number_min(*v, "tick_s", 0.0, true);
  if (auto* v = o.take("net_id")) spec.net_id = static_cast<std::uint32_t>(hex_number(*v, "net_id", 6));
  if (auto* v = o.take("phy")) spec.phy = parse_phy(*v, "phy");
  if (auto* v = o.take("gateways")) {
    const json& gws = array(*v, "gateways");
    for (std::size_t i = 0; i < gws.size(); ++i) {
      const auto path = index_path("gateways", i);
      Obj g(gws[i], path);
      GatewaySpec gw;
      gw.id = text(g.need("id"), g.at("id"));
      gw.location = location(g.need("location"), g.at("location"));
      g.finish();
      spec.gateways.push_back(std::move(gw));
    }
  }
  if (auto* v = o.take("devices")) {
    const json& devs = array(*v, "devices");
    for (std::size_t i = 0; i < devs.size(); ++i) spec.devices.push_back(parse_device(devs[i], index_path("devices", i), i, base_dir));
  }
  if (auto* v = o.take("applications")) {
    const json& apps = array(*v, "applications");
    for (std::size_t i = 0; i < apps.size(); ++i) spec.applications.push_back(parse_application(apps[i], index_path("applications", i)));
  }
  if (auto* v = o.take("multicast_groups")) {
    const json& groups = array(*v, "multicast_groups");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      spec.multicast_groups.push_back(parse_multicast(groups[i], index_path("multicast_groups", i)));
    }
  }
  o.finish();
  validate(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ScenarioError("", "cannot read scenario file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), file.parent_path());
}

void validate(const ScenarioSpec& spec) {
  if (!(spec.tick_s > 0) || !std::isfinite(spec.tick_s)) throw ScenarioError("tick_s", "must be > 0");
  if (!(spec.length_s >= 0) || !std::isfinite(spec.length_s)) throw ScenarioError("length_s", "must be >= 0");
  if (spec.net_id > 0xffffff) throw ScenarioError("net_id", "must fit in 24 bits");
  try {
    spec.phy.path_loss.validate();
  } catch (const ArgumentError& e) {
    throw ScenarioError("phy.path_loss", e.what());
  }
  try {
    spec.phy.collision.validate();
  } catch (const ArgumentError& e) {
    throw ScenarioError("phy.collision", e.what());
  }

  std::map<std::string, std::string> ids;  // id -> path of its first use
  auto claim = [&](const std::string& id, const std::string& path) {
    if (id.empty()) throw ScenarioError(path, "id must not be empty");
    auto [it, fresh] = ids.emplace(id, path);
    if (!fresh) throw ScenarioError(path, fmt::format("duplicate id '{}' (first used at {})", id, it->second));
  };
  for (std::size_t i = 0; i < spec.gateways.size(); ++i) claim(spec.gateways[i].id, index_path("gateways", i) + ".id");

  std::map<std::uint64_t, std::string> euis;
  std::map<std::uint32_t, std::string> addrs;
  for (std::size_t i = 0; i < spec.devices.size(); ++i) {
    const auto& d = spec.devices[i];
    const auto path = index_path("devices", i);
    claim(d.id, path + ".id");
    if (d.sf < 7 || d.sf > 12) throw ScenarioError(path + ".sf", "must lie in [7, 12]");
    if (!(d.start_s >= 0)) throw ScenarioError(path + ".start_s", "must be >= 0");
    if (d.firmware) {
      if (d.traffic) throw ScenarioError(path + ".traffic", "firmware-backed devices generate their own traffic");
      continue;
    }
    if (d.activation == Activation::otaa) {
      auto [it, fresh] = euis.emplace(d.otaa.dev_eui, path);
      if (!fresh) throw ScenarioError(path + ".dev_eui", "dev_eui already used by " + it->second);
    } else {
      auto [it, fresh] = addrs.emplace(d.abp.dev_addr, path);
      if (!fresh) throw ScenarioError(path + ".dev_addr", "dev_addr already used by " + it->second);
    }
    if (d.traffic) {
      if (!(d.traffic->period_s > 0)) throw ScenarioError(path + ".traffic.period_s", "must be > 0");
      if (d.traffic->fport < 1 || d.traffic->fport > 223) throw ScenarioError(path + ".traffic.fport", "must lie in [1, 223]");
      if (d.traffic->payload.size() > kMaxAppPayload) {
        throw ScenarioError(path + ".traffic.payload_hex", fmt::format("payload exceeds {} bytes", kMaxAppPayload));
      }
    }
  }

  std::set<int> ports;
  for (std::size_t i = 0; i < spec.applications.size(); ++i) {
    const auto& a = spec.applications[i];
    const auto path = index_path("applications", i);
    if (a.fport < 1 || a.fport > 223) throw ScenarioError(path + ".fport", "must lie in [1, 223]");
    if (!ports.insert(a.fport).second) throw ScenarioError(path + ".fport", fmt::format("port {} already has an application", a.fport));
    if (a.reply.size() > kMaxAppPayload) throw ScenarioError(path + ".reply_hex", fmt::format("payload exceeds {} bytes", kMaxAppPayload));
  }

  std::set<std::uint32_t> groups;
  for (std::size_t i = 0; i < spec.multicast_groups.size(); ++i) {
    const auto& g = spec.multicast_groups[i];
    const auto path = index_path("multicast_groups", i);
    if (!groups.insert(g.mc_addr).second) throw ScenarioError(path + ".mc_addr", "duplicate multicast address");
    std::set<std::string> seen;
    for (std::size_t m = 0; m < g.members.size(); ++m) {
      const auto mpath = index_path(path + ".members", m);
      auto it = std::find_if(spec.devices.begin(), spec.devices.end(), [&](const DeviceSpec& d) { return d.id == g.members[m]; });
      if (it == spec.devices.end()) throw ScenarioError(mpath, fmt::format("unknown device '{}'", g.members[m]));
      if (it->firmware) throw ScenarioError(mpath, fmt::format("'{}' is firmware-backed", g.members[m]));
      if (!seen.insert(g.members[m]).second) throw ScenarioError(mpath, fmt::format("'{}' listed twice", g.members[m]));
    }
    for (std::size_t s = 0; s < g.sends.size(); ++s) {
      const auto spath = index_path(path + ".sends", s);
      if (g.sends[s].fport < 1 || g.sends[s].fport > 223) throw ScenarioError(spath + ".fport", "must lie in [1, 223]");
      if (g.sends[s].payload.size() > kMaxAppPayload) {
        throw ScenarioError(spath + ".payload_hex", fmt::format("payload exceeds {} bytes", kMaxAppPayload));
      }
    }
  }
}

std::string render_scenario(const ScenarioSpec& spec) {
  ojson root;
  root["version"] = kScenarioVersion;
  root["seed"] = spec.seed;
  root["length_s"] = spec.length_s;
  root["tick_s"] = spec.tick_s;
  root["net_id"] = hex_digits(spec.net_id, 6);

  ojson sens = ojson::object();
  for (const auto& [bw, row] : spec.phy.collision.sensitivity_dbm) sens[std::to_string(bw)] = row;
  root["phy"] = {
      {"path_loss",
       {{"pl0_db", spec.phy.path_loss.pl0_db},
        {"d0_m", spec.phy.path_loss.d0_m},
        {"gamma", spec.phy.path_loss.gamma},
        {"sigma_db", spec.phy.path_loss.sigma_db}}},
      {"collision",
       {{"capture_threshold_db", spec.phy.collision.capture_threshold_db},
        {"critical_preamble_symbols", spec.phy.collision.critical_preamble_symbols},
        {"noise_figure_db", spec.phy.collision.noise_figure_db},
        {"sensitivity_dbm", sens}}},
  };

  root["gateways"] = ojson::array();
  for (const auto& g : spec.gateways) root["gateways"].push_back({{"id", g.id}, {"location", location_json(g.location)}});

  root["devices"] = ojson::array();
  for (const auto& d : spec.devices) {
    ojson j = {{"id", d.id},
              {"location", location_json(d.location)},
              {"class", lorawan::to_string(d.device_class)},
              {"activation", d.activation == Activation::otaa ? "otaa" : "abp"},
              {"start_s", d.start_s},
              {"sf", d.sf},
              {"tx_power_dbm", d.tx_power_dbm},
              {"frequency_hz", d.frequency_hz}};
    if (d.activation == Activation::otaa) {
      j["app_eui"] = hex_digits(d.otaa.app_eui, 16);
      j["dev_eui"] = hex_digits(d.otaa.dev_eui, 16);
      j["app_key"] = to_hex(d.otaa.app_key);
    } else {
      j["dev_addr"] = hex_digits(d.abp.dev_addr, 8);
      j["nwk_skey"] = to_hex(d.abp.nwk_skey);
      j["app_skey"] = to_hex(d.abp.app_skey);
    }
    if (d.traffic) {
      j["traffic"] = {{"period_s", d.traffic->period_s},
                      {"fport", d.traffic->fport},
                      {"payload_hex", to_hex(d.traffic->payload)},
                      {"confirmed", d.traffic->confirmed},
                      {"jitter_s", d.traffic->jitter_s}};
    }
    if (d.firmware) {
      j["firmware"] = {{"path", d.firmware->path.string()},
                       {"entry", d.firmware->entry},
                       {"watchdog_s", d.firmware->watchdog_s}};
    }
    root["devices"].push_back(std::move(j));
  }

  root["applications"] = ojson::array();
  for (const auto& a : spec.applications) {
    ojson j = {{"fport", a.fport}, {"reply_hex", to_hex(a.reply)}};
    if (a.match) j["match_hex"] = to_hex(*a.match);
    root["applications"].push_back(std::move(j));
  }

  root["multicast_groups"] = ojson::array();
  for (const auto& g : spec.multicast_groups) {
    ojson sends = ojson::array();
    for (const auto& s : g.sends) sends.push_back({{"at_s", s.at_s}, {"fport", s.fport}, {"payload_hex", to_hex(s.payload)}});
    root["multicast_groups"].push_back({{"mc_addr", hex_digits(g.mc_addr, 8)},
                                        {"mc_nwk_skey", to_hex(g.mc_nwk_skey)},
                                        {"mc_app_skey", to_hex(g.mc_app_skey)},
                                        {"members", g.members},
                                        {"sends", std::move(sends)}});
  }
  return root.dump(2) + "\n";
}

}  // namespace lorasim::scenario
