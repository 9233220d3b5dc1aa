#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace lorasim::lorawan {

using Key = std::array<std::uint8_t, 16>;
using Block = std::array<std::uint8_t, 16>;
using Mic = std::array<std::uint8_t, 4>;

enum class Direction : std::uint8_t { up = 0, down = 1 };

/// Parses 32 hex digits.
Key key_from_hex(std::string_view hex);

Block aes_encrypt(const Key& key, const Block& block);
Block aes_decrypt(const Key& key, const Block& block);

/// AES-128-CMAC (full 16-byte tag).
Block aes_cmac(const Key& key, std::span<const std::uint8_t> message);

/// Data-frame MIC: CMAC over B0 || msg, truncated to four bytes.
Mic compute_mic(const Key& key, std::span<const std::uint8_t> msg, Direction dir, std::uint32_t dev_addr,
                std::uint32_t fcnt);

/// Join-request and join-accept MIC: CMAC over msg without a B0 prefix.
Mic join_mic(const Key& key, std::span<const std::uint8_t> msg);

/// FRMPayload encryption. XOR with a counter keystream, so applying it twice restores the input.
std::vector<std::uint8_t> crypt_payload(const Key& key, std::span<const std::uint8_t> payload, Direction dir,
                                        std::uint32_t dev_addr, std::uint32_t fcnt);

struct SessionKeys {
  Key nwk_skey{};
  Key app_skey{};
};

/// app_nonce and net_id are 24-bit values.
SessionKeys derive_session_keys(const Key& app_key, std::uint32_t app_nonce, std::uint32_t net_id,
                                std::uint16_t dev_nonce);

/// Server side. `body` is the accept without MHDR, MIC included (16 or 32 bytes). Uses the
/// AES decrypt primitive so that devices only need encryption.
std::vector<std::uint8_t> join_accept_encrypt(const Key& app_key, std::span<const std::uint8_t> body);
/// Device side inverse of join_accept_encrypt.
std::vector<std::uint8_t> join_accept_decrypt(const Key& app_key, std::span<const std::uint8_t> wire_body);

}  // namespace lorasim::lorawan
