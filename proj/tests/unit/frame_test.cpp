#include <doctest.h>

#include <random>

#include "lorasim/hex.hpp"
#include "lorasim/lorawan/frame.hpp"
#include "lorasim/lorawan/mac_commands.hpp"
#include "lorasim/lorawan/region.hpp"

using namespace lorasim::lorawan;
using lorasim::from_hex;
using lorasim::to_hex;

namespace {

const Key kKey = key_from_hex("2b7e151628aed2a6abf7158809cf4f3c");

MacFrame random_frame(std::mt19937_64& gen) {
  static const MType types[] = {MType::unconfirmed_up, MType::unconfirmed_down, MType::confirmed_up,
                                MType::confirmed_down};
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  MacFrame f;
  f.mtype = types[pick(0, 3)];
  f.dev_addr = static_cast<std::uint32_t>(gen());
  f.fctrl = FCtrl{pick(0, 1) == 1, pick(0, 1) == 1, pick(0, 1) == 1, pick(0, 1) == 1};
  f.fcnt = static_cast<std::uint16_t>(gen());
  const int port_kind = pick(0, 2);  // none, zero, application
  if (port_kind != 1) {
    f.fopts.resize(static_cast<std::size_t>(pick(0, 15)));
    for (auto& b : f.fopts) b = static_cast<std::uint8_t>(gen());
  }
  if (port_kind == 1) f.fport = 0;
  if (port_kind == 2) f.fport = static_cast<std::uint8_t>(pick(1, 223));
  if (f.fport) {
    const std::size_t room = kMaxPhyPayload - 13 - f.fopts.size();
    f.frm_payload.resize(static_cast<std::size_t>(pick(0, static_cast<int>(room))));
    for (auto& b : f.frm_payload) b = static_cast<std::uint8_t>(gen());
  }
  for (auto& b : f.mic) b = static_cast<std::uint8_t>(gen());
  return f;
}

}  // namespace

TEST_CASE("codec round trip for 10^4 random valid frames") {
  std::mt19937_64 gen(1);
  for (int i = 0; i < 10'000; ++i) {
    const MacFrame f = random_frame(gen);
    const auto wire = encode(f);
    const MacFrame back = decode(wire);
    REQUIRE(back == f);
    REQUIRE(encode(back) == wire);
  }
}

TEST_CASE("minimal uplink is 12 bytes") {
  MacFrame f;
  CHECK(encode(f).size() == 12);
}

TEST_CASE("full uplink wire matches an independent frame builder") {
  MacFrame f;
  f.dev_addr = 0x26011bda;
  f.fport = 1;
  f.frm_payload = {'p', 'i', 'n', 'g'};
  CHECK(to_hex(seal(f, kKey, kKey, 1)) == "40da1b012600010001f29a5708922b1e3b");
}

TEST_CASE("confirmed downlink with ACK and a 32-bit counter") {
  MacFrame f;
  f.mtype = MType::unconfirmed_down;
  f.dev_addr = 0x26011bda;
  f.fctrl.ack = true;
  f.fport = 2;
  f.frm_payload = {'p', 'o', 'n', 'g'};
  auto wire = seal(f, kKey, kKey, 0x10005);
  CHECK(to_hex(wire) == "60da1b012620050002aa9e9b08513a51e3");
  auto d = decode(wire);
  CHECK(d.fcnt == 5);
  CHECK(verify_mic(wire, d, kKey, 0x10005));
  CHECK_FALSE(verify_mic(wire, d, kKey, 5));
  CHECK(decrypt_payload(d, kKey, kKey, 0x10005) == std::vector<std::uint8_t>{'p', 'o', 'n', 'g'});
}

TEST_CASE("decode errors name the offending field") {
  auto check_field = [](std::vector<std::uint8_t> wire, const std::string& field) {
    try {
      decode(wire);
      FAIL("expected a decode error");
    } catch (const DecodeError& e) {
      CHECK(e.field() == field);
    }
  };
  // fopts_len = 3 but only 2 bytes before the MIC
  check_field(from_hex("40da1b012603010001020a0b0c0d"), "fopts");
  check_field(from_hex("40da1b01260001"), "fhdr");
  check_field({}, "mhdr");
  check_field(from_hex("e0da1b0126000100aabbccdd"), "mhdr");
  check_field(from_hex("41da1b0126000100aabbccdd"), "mhdr");
  check_field(from_hex("40da1b0126000100e0aabbccdd"), "fport");
  std::vector<std::uint8_t> big(256, 0);
  big[0] = 0x40;
  check_field(big, "frame");
}

TEST_CASE("encode validates field ranges") {
  MacFrame f;
  f.fopts.resize(16);
  CHECK_THROWS_AS(encode(f), lorasim::ArgumentError);
  f = {};
  f.frm_payload = {1};
  CHECK_THROWS_AS(encode(f), lorasim::ArgumentError);
  f = {};
  f.fport = 224;
  CHECK_THROWS_AS(encode(f), lorasim::ArgumentError);
  f = {};
  f.fport = 0;
  f.fopts = {2};
  CHECK_THROWS_AS(encode(f), lorasim::ArgumentError);
  f = {};
  f.mtype = MType::join_request;
  CHECK_THROWS_AS(encode(f), lorasim::ArgumentError);
}

TEST_CASE("wire confidentiality: sealed payloads differ from plaintext") {
  std::mt19937_64 gen(9);
  for (int i = 0; i < 500; ++i) {
    MacFrame f;
    f.dev_addr = static_cast<std::uint32_t>(gen());
    f.fport = 1;
    f.frm_payload.resize(4 + gen() % 60);
    for (auto& b : f.frm_payload) b = static_cast<std::uint8_t>(gen());
    auto wire = seal(f, kKey, kKey, static_cast<std::uint32_t>(i));
    auto d = decode(wire);
    CHECK(d.frm_payload != f.frm_payload);
  }
}

TEST_CASE("frame counter reconstruction") {
  CHECK(expand_fcnt(std::nullopt, 7) == 7);
  CHECK(expand_fcnt(10, 11) == 11);
  CHECK(expand_fcnt(0xffff, 0) == 0x10000);
  CHECK(expand_fcnt(0x1fffe, 0x0002) == 0x20002);
  CHECK(expand_fcnt(0x10005, 0xfff0) == 0xfff0);
  CHECK(expand_fcnt(0x10000, 0x0000) == 0x10000);
  CHECK(expand_fcnt(0xfffffffe, 0xffff) == 0xffffffff);
  // a candidate exactly 2^15 either side: prefer the later one
  CHECK(expand_fcnt(0x17fff, 0x0000) == 0x20000);
}

TEST_CASE("MAC commands round trip in both directions") {
  std::vector<MacCommand> up{LinkCheckReq{}, LinkAdrAns{true, false, true}, DevStatusAns{200, -7}};
  std::vector<MacCommand> down{LinkCheckAns{12, 2}, LinkAdrReq{3, 2, 0x0007, 0, 1}, DevStatusReq{}};
  CHECK(parse_commands(encode_commands(up), Direction::up) == up);
  CHECK(parse_commands(encode_commands(down), Direction::down) == down);
  CHECK(to_hex(encode_commands(std::vector<MacCommand>{LinkAdrReq{3, 2, 0x0007, 0, 1}})) == "0332070001");
  CHECK(to_hex(encode_commands(std::vector<MacCommand>{DevStatusAns{255, -1}})) == "06ff3f");
}

TEST_CASE("an unknown CID stops parsing") {
  auto bytes = from_hex("02" "7f0102" "02");
  auto cmds = parse_commands(bytes, Direction::up);
  REQUIRE(cmds.size() == 1);
  CHECK(std::holds_alternative<LinkCheckReq>(cmds[0]));
  CHECK(parse_commands(from_hex("0301"), Direction::down).empty());
}

TEST_CASE("regional helpers") {
  CHECK(dr_to_sf(0) == 12);
  CHECK(dr_to_sf(5) == 7);
  CHECK(sf_to_dr(9) == 3);
  CHECK_THROWS(dr_to_sf(6));
  CHECK(tx_power_index_to_dbm(0) == 16.0);
  CHECK(tx_power_index_to_dbm(1) == 14.0);
  CHECK(dbm_to_tx_power_index(14.0) == 1);
  CHECK(link_margin(-5.0, 7) == 3);   // -5 - (-7.5) = 2.5, rounds to 3
  CHECK(link_margin(-30.0, 12) == 0);
  CHECK(status_margin(-4.6) == -5);
  CHECK(status_margin(50) == 31);
  CHECK(status_margin(-50) == -32);
  RxWindowParams p;
  p.rx2_delay_s = 0.5;
  CHECK_THROWS(p.validate());
}
