#include "lorasim/lorawan/frame.hpp"

#include <algorithm>

namespace lorasim::lorawan {

const char* to_string(MType t) {
  switch (t) {
    case MType::join_request:
      return "JoinRequest";
    case MType::join_accept:
      return "JoinAccept";
    case MType::unconfirmed_up:
      return "UnconfirmedDataUp";
    case MType::unconfirmed_down:
      return "UnconfirmedDataDown";
    case MType::confirmed_up:
      return "ConfirmedDataUp";
    case MType::confirmed_down:
      return "ConfirmedDataDown";
  }
  return "?";
}

bool is_data(MType t) { return t != MType::join_request && t != MType::join_accept; }

Direction direction_of(MType t) {
  switch (t) {
    case MType::join_request:
    case MType::unconfirmed_up:
    case MType::confirmed_up:
      return Direction::up;
    default:
      return Direction::down;
  }
}

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t off, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= std::uint64_t{in[off + i]} << (8 * i);
  return v;
}

std::uint8_t mhdr(MType t) { return static_cast<std::uint8_t>(static_cast<std::uint8_t>(t) << 5); }

void need(bool ok, const char* field, const std::string& what) {
  if (!ok) throw DecodeError(field, what);
}

}  // namespace

MType peek_mtype(std::span<const std::uint8_t> wire) {
  need(!wire.empty(), "mhdr", "empty frame");
  const std::uint8_t m = wire[0];
  need((m & 0x03) == 0, "mhdr", "unsupported major version " + std::to_string(m & 0x03));
  need((m & 0x1c) == 0, "mhdr", "RFU bits set");
  const int t = m >> 5;
  need(t <= 5, "mhdr", "unsupported message type " + std::to_string(t));
  return static_cast<MType>(t);
}

std::vector<std::uint8_t> encode(const MacFrame& f) {
  if (!is_data(f.mtype)) throw ArgumentError("mtype: not a data frame");
  if (f.fopts.size() > 15) throw ArgumentError("fopts: " + std::to_string(f.fopts.size()) + " bytes exceeds 15");
  if (!f.fport && !f.frm_payload.empty()) throw ArgumentError("fport: payload present without a port");
  if (f.fport && *f.fport > kMaxFPort) throw ArgumentError("fport: " + std::to_string(*f.fport) + " exceeds 223");
  if (f.fport == 0 && !f.fopts.empty()) throw ArgumentError("fopts: must be empty when fport is 0");

  std::vector<std::uint8_t> out;
  out.reserve(12 + f.fopts.size() + 1 + f.frm_payload.size());
  out.push_back(mhdr(f.mtype));
  put_le(out, f.dev_addr, 4);
  out.push_back(static_cast<std::uint8_t>((f.fctrl.adr ? 0x80 : 0) | (f.fctrl.adr_ack_req ? 0x40 : 0) |
                                          (f.fctrl.ack ? 0x20 : 0) | (f.fctrl.fpending ? 0x10 : 0) |
                                          f.fopts.size()));
  put_le(out, f.fcnt, 2);
  out.insert(out.end(), f.fopts.begin(), f.fopts.end());
  if (f.fport) {
    out.push_back(*f.fport);
    out.insert(out.end(), f.frm_payload.begin(), f.frm_payload.end());
  }
  out.insert(out.end(), f.mic.begin(), f.mic.end());
  if (out.size() > kMaxPhyPayload) {
    throw ArgumentError("frame: " + std::to_string(out.size()) + " bytes exceeds 255");
  }
  return out;
}

MacFrame decode(std::span<const std::uint8_t> wire) {
  const MType t = peek_mtype(wire);
  need(is_data(t), "mhdr", std::string("expected a data frame, got ") + to_string(t));
  need(wire.size() <= kMaxPhyPayload, "frame", std::to_string(wire.size()) + " bytes exceeds 255");
  need(wire.size() >= 12, "fhdr", "frame of " + std::to_string(wire.size()) + " bytes is shorter than 12");
  MacFrame f;
  f.mtype = t;
  f.dev_addr = static_cast<std::uint32_t>(get_le(wire, 1, 4));
  const std::uint8_t fctrl = wire[5];
  f.fctrl = FCtrl{(fctrl & 0x80) != 0, (fctrl & 0x40) != 0, (fctrl & 0x20) != 0, (fctrl & 0x10) != 0};
  f.fcnt = static_cast<std::uint16_t>(get_le(wire, 6, 2));
  const std::size_t fopts_len = fctrl & 0x0f;
  const std::size_t body_end = wire.size() - 4;
  need(8 + fopts_len <= body_end, "fopts",
       "fopts_len " + std::to_string(fopts_len) + " exceeds the " + std::to_string(body_end - 8) + " bytes available");
  f.fopts.assign(wire.begin() + 8, wire.begin() + static_cast<std::ptrdiff_t>(8 + fopts_len));
  std::size_t pos = 8 + fopts_len;
  if (pos < body_end) {
    f.fport = wire[pos];
    need(*f.fport <= kMaxFPort, "fport", std::to_string(*f.fport) + " exceeds 223");
    need(!(*f.fport == 0 && fopts_len > 0), "fopts", "must be empty when fport is 0");
    f.frm_payload.assign(wire.begin() + static_cast<std::ptrdiff_t>(pos + 1),
                         wire.begin() + static_cast<std::ptrdiff_t>(body_end));
  }
  std::copy(wire.end() - 4, wire.end(), f.mic.begin());
  return f;
}

std::vector<std::uint8_t> encode(const JoinRequest& req) {
  std::vector<std::uint8_t> out;
  out.push_back(mhdr(MType::join_request));
  put_le(out, req.app_eui, 8);
  put_le(out, req.dev_eui, 8);
  put_le(out, req.dev_nonce, 2);
  out.insert(out.end(), req.mic.begin(), req.mic.end());
  return out;
}

JoinRequest decode_join_request(std::span<const std::uint8_t> wire) {
  need(peek_mtype(wire) == MType::join_request, "mhdr", "not a join request");
  need(wire.size() == 23, "join_request", "expected 23 bytes, got " + std::to_string(wire.size()));
  JoinRequest r;
  r.app_eui = get_le(wire, 1, 8);
  r.dev_eui = get_le(wire, 9, 8);
  r.dev_nonce = static_cast<std::uint16_t>(get_le(wire, 17, 2));
  std::copy(wire.begin() + 19, wire.end(), r.mic.begin());
  return r;
}

std::vector<std::uint8_t> build_join_request(JoinRequest req, const Key& app_key) {
  auto wire = encode(req);
  req.mic = join_mic(app_key, std::span(wire).first(19));
  std::copy(req.mic.begin(), req.mic.end(), wire.begin() + 19);
  return wire;
}

bool verify_join_request(std::span<const std::uint8_t> wire, const Key& app_key) {
  if (wire.size() != 23) return false;
  const Mic m = join_mic(app_key, wire.first(19));
  return std::equal(m.begin(), m.end(), wire.begin() + 19);
}

std::vector<std::uint8_t> accept_plaintext(const JoinAccept& a) {
  std::vector<std::uint8_t> out;
  put_le(out, a.app_nonce, 3);
  put_le(out, a.net_id, 3);
  put_le(out, a.dev_addr, 4);
  out.push_back(a.dl_settings);
  out.push_back(a.rx_delay);
  if (a.cflist) out.insert(out.end(), a.cflist->begin(), a.cflist->end());
  return out;
}

std::vector<std::uint8_t> build_join_accept(const JoinAccept& a, const Key& app_key) {
  std::vector<std::uint8_t> msg{mhdr(MType::join_accept)};
  auto body = accept_plaintext(a);
  msg.insert(msg.end(), body.begin(), body.end());
  const Mic mic = join_mic(app_key, msg);
  body.insert(body.end(), mic.begin(), mic.end());
  auto enc = join_accept_encrypt(app_key, body);
  std::vector<std::uint8_t> wire{mhdr(MType::join_accept)};
  wire.insert(wire.end(), enc.begin(), enc.end());
  return wire;
}

std::optional<JoinAccept> open_join_accept(std::span<const std::uint8_t> wire, const Key& app_key) {
  need(peek_mtype(wire) == MType::join_accept, "mhdr", "not a join accept");
  need(wire.size() == 17 || wire.size() == 33, "join_accept",
       "expected 17 or 33 bytes, got " + std::to_string(wire.size()));
  const auto body = join_accept_decrypt(app_key, wire.subspan(1));
  std::vector<std::uint8_t> msg{wire[0]};
  msg.insert(msg.end(), body.begin(), body.end() - 4);
  const Mic mic = join_mic(app_key, msg);
  if (!std::equal(mic.begin(), mic.end(), body.end() - 4)) {
    return std::nullopt;
  }
  JoinAccept a;
  a.app_nonce = static_cast<std::uint32_t>(get_le(body, 0, 3));
  a.net_id = static_cast<std::uint32_t>(get_le(body, 3, 3));
  a.dev_addr = static_cast<std::uint32_t>(get_le(body, 6, 4));
  a.dl_settings = body[10];
  a.rx_delay = body[11];
  if (body.size() == 32) {
    std::array<std::uint8_t, 16> cf{};
    std::copy_n(body.begin() + 12, 16, cf.begin());
    a.cflist = cf;
  }
  return a;
}

std::vector<std::uint8_t> seal(MacFrame frame, const Key& nwk_skey, const Key& app_skey, std::uint32_t fcnt32) {
  const Direction dir = direction_of(frame.mtype);
  frame.fcnt = static_cast<std::uint16_t>(fcnt32 & 0xffff);
  if (frame.fport) {
    const Key& k = *frame.fport == 0 ? nwk_skey : app_skey;
    frame.frm_payload = crypt_payload(k, frame.frm_payload, dir, frame.dev_addr, fcnt32);
  }
  frame.mic = {};
  auto wire = encode(frame);
  const Mic mic = compute_mic(nwk_skey, std::span(wire).first(wire.size() - 4), dir, frame.dev_addr, fcnt32);
  std::copy(mic.begin(), mic.end(), wire.end() - 4);
  return wire;
}

bool verify_mic(std::span<const std::uint8_t> wire, const MacFrame& frame, const Key& nwk_skey, std::uint32_t fcnt32) {
  if (wire.size() < 4) return false;
  const Mic mic =
      compute_mic(nwk_skey, wire.first(wire.size() - 4), direction_of(frame.mtype), frame.dev_addr, fcnt32);
  return mic == frame.mic;
}

std::vector<std::uint8_t> decrypt_payload(const MacFrame& frame, const Key& nwk_skey, const Key& app_skey,
                                          std::uint32_t fcnt32) {
  if (!frame.fport) return {};
  const Key& k = *frame.fport == 0 ? nwk_skey : app_skey;
  return crypt_payload(k, frame.frm_payload, direction_of(frame.mtype), frame.dev_addr, fcnt32);
}

std::uint32_t expand_fcnt(std::optional<std::uint32_t> last, std::uint16_t wire) {
  if (!last) return wire;
  const std::int64_t expected = static_cast<std::int64_t>(*last) + 1;
  const std::int64_t base = (expected & ~std::int64_t{0xffff}) | wire;
  std::optional<std::int64_t> best;
  for (std::int64_t c : {base - 0x10000, base, base + 0x10000}) {
    if (c < 0 || c > 0xffffffffLL) continue;
    if (!best || std::abs(c - expected) < std::abs(*best - expected) ||
        (std::abs(c - expected) == std::abs(*best - expected) && c > *best)) {
      best = c;
    }
  }
  return static_cast<std::uint32_t>(*best);
}

}  // namespace lorasim::lorawan
