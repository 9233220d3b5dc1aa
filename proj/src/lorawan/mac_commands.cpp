#include "lorasim/lorawan/mac_commands.hpp"

#include "lorasim/errors.hpp"
#include "lorasim/log.hpp"

namespace lorasim::lorawan {

namespace {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};

}  // namespace

std::uint8_t command_id(const MacCommand& cmd) {
  return std::visit(Overload{[](const LinkCheckReq&) { return cid::link_check; },
                             [](const LinkCheckAns&) { return cid::link_check; },
                             [](const LinkAdrReq&) { return cid::link_adr; },
                             [](const LinkAdrAns&) { return cid::link_adr; },
                             [](const DevStatusReq&) { return cid::dev_status; },
                             [](const DevStatusAns&) { return cid::dev_status; }},
                    cmd);
}

Direction command_direction(const MacCommand& cmd) {
  const bool up = std::holds_alternative<LinkCheckReq>(cmd) || std::holds_alternative<LinkAdrAns>(cmd) ||
                  std::holds_alternative<DevStatusAns>(cmd);
  return up ? Direction::up : Direction::down;
}

std::vector<std::uint8_t> encode_commands(std::span<const MacCommand> cmds) {
  std::vector<std::uint8_t> out;
  for (const auto& cmd : cmds) {
    out.push_back(command_id(cmd));
    std::visit(Overload{[](const LinkCheckReq&) {}, [](const DevStatusReq&) {},
                        [&](const LinkCheckAns& a) {
                          out.push_back(a.margin);
                          out.push_back(a.gw_cnt);
                        },
                        [&](const LinkAdrReq& r) {
                          if (r.data_rate > 15 || r.tx_power > 15 || r.ch_mask_cntl > 7 || r.nb_trans > 15) {
                            throw ArgumentError("LinkADRReq field out of range");
                          }
                          out.push_back(static_cast<std::uint8_t>(r.data_rate << 4 | r.tx_power));
                          out.push_back(static_cast<std::uint8_t>(r.ch_mask & 0xff));
                          out.push_back(static_cast<std::uint8_t>(r.ch_mask >> 8));
                          out.push_back(static_cast<std::uint8_t>(r.ch_mask_cntl << 4 | r.nb_trans));
                        },
                        [&](const LinkAdrAns& a) {
                          out.push_back(static_cast<std::uint8_t>((a.power_ack ? 4 : 0) | (a.data_rate_ack ? 2 : 0) |
                                                                  (a.channel_mask_ack ? 1 : 0)));
                        },
                        [&](const DevStatusAns& a) {
                          if (a.margin < -32 || a.margin > 31) {
                            throw ArgumentError("DevStatusAns margin outside -32..31");
                          }
                          out.push_back(a.battery);
                          out.push_back(static_cast<std::uint8_t>(a.margin) & 0x3f);
                        }},
               cmd);
  }
  return out;
}

std::vector<MacCommand> parse_commands(std::span<const std::uint8_t> bytes, Direction dir) {
  std::vector<MacCommand> out;
  std::size_t i = 0;
  auto logger = log::get("lorawan");
  while (i < bytes.size()) {
    const std::uint8_t id = bytes[i];
    std::size_t len = 0;
    if (id == cid::link_check) {
      len = dir == Direction::up ? 0 : 2;
    } else if (id == cid::link_adr) {
      len = dir == Direction::up ? 1 : 4;
    } else if (id == cid::dev_status) {
      len = dir == Direction::up ? 2 : 0;
    } else {
      logger->warn("unknown MAC command 0x{:02x}; ignoring the remaining {} bytes", id, bytes.size() - i);
      break;
    }
    if (i + 1 + len > bytes.size()) {
      logger->warn("truncated MAC command 0x{:02x}", id);
      break;
    }
    const auto* p = bytes.data() + i + 1;
    if (id == cid::link_check) {
      if (dir == Direction::up) {
        out.emplace_back(LinkCheckReq{});
      } else {
        out.emplace_back(LinkCheckAns{p[0], p[1]});
      }
    } else if (id == cid::link_adr) {
      if (dir == Direction::up) {
        out.emplace_back(LinkAdrAns{(p[0] & 4) != 0, (p[0] & 2) != 0, (p[0] & 1) != 0});
      } else {
        out.emplace_back(LinkAdrReq{static_cast<std::uint8_t>(p[0] >> 4), static_cast<std::uint8_t>(p[0] & 0x0f),
                                    static_cast<std::uint16_t>(p[1] | p[2] << 8),
                                    static_cast<std::uint8_t>((p[3] >> 4) & 0x07),
                                    static_cast<std::uint8_t>(p[3] & 0x0f)});
      }
    } else {
      if (dir == Direction::up) {
        // sign-extend the 6-bit margin
        const int m = (p[1] & 0x20) ? (p[1] & 0x3f) - 64 : (p[1] & 0x3f);
        out.emplace_back(DevStatusAns{p[0], static_cast<std::int8_t>(m)});
      } else {
        out.emplace_back(DevStatusReq{});
      }
    }
    i += 1 + len;
  }
  return out;
}

}  // namespace lorasim::lorawan
