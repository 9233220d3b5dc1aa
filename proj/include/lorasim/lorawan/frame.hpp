#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lorasim/errors.hpp"
#include "lorasim/lorawan/crypto.hpp"

namespace lorasim::lorawan {

enum class MType : std::uint8_t {
  join_request = 0,
  join_accept = 1,
  unconfirmed_up = 2,
  unconfirmed_down = 3,
  confirmed_up = 4,
  confirmed_down = 5,
};

const char* to_string(MType t);
bool is_data(MType t);
Direction direction_of(MType t);

/// Malformed wire input. `field()` names the part of the frame that failed.
class DecodeError : public ArgumentError {
 public:
  DecodeError(std::string field, const std::string& what)
      : ArgumentError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct FCtrl {
  bool adr = false;
  bool adr_ack_req = false;
  bool ack = false;
  bool fpending = false;
  friend bool operator==(const FCtrl&, const FCtrl&) = default;
};

/// A data frame. frm_payload holds whatever is on the wire (ciphertext once sealed).
/// fport absent implies an empty frm_payload; fopts_len on the wire is fopts.size().
struct MacFrame {
  MType mtype = MType::unconfirmed_up;
  std::uint32_t dev_addr = 0;
  FCtrl fctrl;
  std::uint16_t fcnt = 0;
  std::vector<std::uint8_t> fopts;
  std::optional<std::uint8_t> fport;
  std::vector<std::uint8_t> frm_payload;
  Mic mic{};
  friend bool operator==(const MacFrame&, const MacFrame&) = default;
};

constexpr std::size_t kMaxPhyPayload = 255;
constexpr std::uint8_t kMaxFPort = 223;

std::vector<std::uint8_t> encode(const MacFrame& frame);
MacFrame decode(std::span<const std::uint8_t> wire);
/// Message type of any wire frame; throws DecodeError on empty input, RFU types or a nonzero major.
MType peek_mtype(std::span<const std::uint8_t> wire);

struct JoinRequest {
  std::uint64_t app_eui = 0;
  std::uint64_t dev_eui = 0;
  std::uint16_t dev_nonce = 0;
  Mic mic{};
  friend bool operator==(const JoinRequest&, const JoinRequest&) = default;
};

std::vector<std::uint8_t> encode(const JoinRequest& req);
JoinRequest decode_join_request(std::span<const std::uint8_t> wire);
/// Encoded request with its MIC computed under `app_key`.
std::vector<std::uint8_t> build_join_request(JoinRequest req, const Key& app_key);
bool verify_join_request(std::span<const std::uint8_t> wire, const Key& app_key);

struct JoinAccept {
  std::uint32_t app_nonce = 0;  // 24 bits
  std::uint32_t net_id = 0;     // 24 bits
  std::uint32_t dev_addr = 0;
  std::uint8_t dl_settings = 0;
  std::uint8_t rx_delay = 1;
  std::optional<std::array<std::uint8_t, 16>> cflist;
  friend bool operator==(const JoinAccept&, const JoinAccept&) = default;
};

/// Plaintext accept body (without MHDR and MIC).
std::vector<std::uint8_t> accept_plaintext(const JoinAccept& accept);
std::vector<std::uint8_t> build_join_accept(const JoinAccept& accept, const Key& app_key);
/// nullopt when the MIC does not verify under `app_key`. Throws DecodeError on a bad length.
std::optional<JoinAccept> open_join_accept(std::span<const std::uint8_t> wire, const Key& app_key);

/// Encrypts `frame.frm_payload` (port 0 uses the network key), sets the 16-bit fcnt from
/// `fcnt32`, computes the MIC and returns the wire bytes.
std::vector<std::uint8_t> seal(MacFrame frame, const Key& nwk_skey, const Key& app_skey, std::uint32_t fcnt32);
bool verify_mic(std::span<const std::uint8_t> wire, const MacFrame& frame, const Key& nwk_skey, std::uint32_t fcnt32);
std::vector<std::uint8_t> decrypt_payload(const MacFrame& frame, const Key& nwk_skey, const Key& app_skey,
                                          std::uint32_t fcnt32);

/// Reconstructs a 32-bit counter from its low 16 bits: the candidate closest to last + 1,
/// preferring the later one on a tie. Without history the high half is zero.
std::uint32_t expand_fcnt(std::optional<std::uint32_t> last, std::uint16_t wire);

}  // namespace lorasim::lorawan
