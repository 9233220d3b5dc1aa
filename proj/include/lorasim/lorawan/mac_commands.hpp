#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "lorasim/lorawan/crypto.hpp"

namespace lorasim::lorawan {

namespace cid {
constexpr std::uint8_t link_check = 0x02;
constexpr std::uint8_t link_adr = 0x03;
constexpr std::uint8_t dev_status = 0x06;
}  // namespace cid

struct LinkCheckReq {
  friend bool operator==(const LinkCheckReq&, const LinkCheckReq&) = default;
};
struct LinkCheckAns {
  std::uint8_t margin = 0;  // dB above the demodulation floor
  std::uint8_t gw_cnt = 0;
  friend bool operator==(const LinkCheckAns&, const LinkCheckAns&) = default;
};
struct LinkAdrReq {
  std::uint8_t data_rate = 0;  // 4 bits
  std::uint8_t tx_power = 0;   // 4 bits
  std::uint16_t ch_mask = 0x0001;
  std::uint8_t ch_mask_cntl = 0;  // 3 bits
  std::uint8_t nb_trans = 0;      // 4 bits
  friend bool operator==(const LinkAdrReq&, const LinkAdrReq&) = default;
};
struct LinkAdrAns {
  bool power_ack = false;
  bool data_rate_ack = false;
  bool channel_mask_ack = false;
  friend bool operator==(const LinkAdrAns&, const LinkAdrAns&) = default;
};
struct DevStatusReq {
  friend bool operator==(const DevStatusReq&, const DevStatusReq&) = default;
};
struct DevStatusAns {
  std::uint8_t battery = 255;  // 0 external power, 1..254 level, 255 unknown
  std::int8_t margin = 0;      // -32..31 dB
  friend bool operator==(const DevStatusAns&, const DevStatusAns&) = default;
};

using MacCommand = std::variant<LinkCheckReq, LinkCheckAns, LinkAdrReq, LinkAdrAns, DevStatusReq, DevStatusAns>;

std::uint8_t command_id(const MacCommand& cmd);
/// Direction of the frame the command travels in.
Direction command_direction(const MacCommand& cmd);

std::vector<std::uint8_t> encode_commands(std::span<const MacCommand> cmds);

/// Parses commands carried in a frame travelling in `dir`. An unknown CID or a truncated
/// command ends parsing; everything before it is returned.
std::vector<MacCommand> parse_commands(std::span<const std::uint8_t> bytes, Direction dir);

}  // namespace lorasim::lorawan
