#include "lorasim/lorawan/crypto.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

#include "lorasim/errors.hpp"
#include "lorasim/hex.hpp"

namespace lorasim::lorawan {

namespace {

struct CtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

Block ecb(const Key& key, const Block& in, bool encrypt) {
  std::unique_ptr<EVP_CIPHER_CTX, CtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_CipherInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr, encrypt ? 1 : 0) != 1) {
    throw std::runtime_error("AES context initialisation failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
  Block out{};
  int len = 0;
  if (EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(), static_cast<int>(in.size())) != 1 || len != 16) {
    throw std::runtime_error("AES block operation failed");
  }
  return out;
}

Block shift_subkey(const Block& in) {
  Block out{};
  for (int i = 0; i < 16; ++i) {
    out[i] = static_cast<std::uint8_t>(in[i] << 1);
    if (i < 15) out[i] |= in[i + 1] >> 7;
  }
  if (in[0] & 0x80) out[15] ^= 0x87;
  return out;
}

void put_le32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

Key key_from_hex(std::string_view hex) {
  auto bytes = from_hex(hex);
  if (bytes.size() != 16) {
    throw ArgumentError("AES key must be 16 bytes, got " + std::to_string(bytes.size()));
  }
  Key k{};
  std::copy(bytes.begin(), bytes.end(), k.begin());
  return k;
}

Block aes_encrypt(const Key& key, const Block& block) { return ecb(key, block, true); }
Block aes_decrypt(const Key& key, const Block& block) { return ecb(key, block, false); }

Block aes_cmac(const Key& key, std::span<const std::uint8_t> message) {
  const Block k1 = shift_subkey(aes_encrypt(key, Block{}));
  const Block k2 = shift_subkey(k1);

  const std::size_t n = message.empty() ? 1 : (message.size() + 15) / 16;
  const bool complete = !message.empty() && message.size() % 16 == 0;

  Block last{};
  const std::size_t tail = message.size() - (n - 1) * 16;
  for (std::size_t i = 0; i < tail; ++i) last[i] = message[(n - 1) * 16 + i];
  if (complete) {
    for (int i = 0; i < 16; ++i) last[i] ^= k1[i];
  } else {
    last[tail] = 0x80;
    for (int i = 0; i < 16; ++i) last[i] ^= k2[i];
  }

  Block x{};
  for (std::size_t b = 0; b + 1 < n; ++b) {
    for (int i = 0; i < 16; ++i) x[i] ^= message[b * 16 + i];
    x = aes_encrypt(key, x);
  }
  for (int i = 0; i < 16; ++i) x[i] ^= last[i];
  return aes_encrypt(key, x);
}

Mic compute_mic(const Key& key, std::span<const std::uint8_t> msg, Direction dir, std::uint32_t dev_addr,
                std::uint32_t fcnt) {
  if (msg.size() > 255) {
    throw ArgumentError("MIC message longer than 255 bytes");
  }
  std::vector<std::uint8_t> buf(16 + msg.size(), 0);
  buf[0] = 0x49;
  buf[5] = static_cast<std::uint8_t>(dir);
  put_le32(&buf[6], dev_addr);
  put_le32(&buf[10], fcnt);
  buf[15] = static_cast<std::uint8_t>(msg.size());
  std::copy(msg.begin(), msg.end(), buf.begin() + 16);
  Block tag = aes_cmac(key, buf);
  return {tag[0], tag[1], tag[2], tag[3]};
}

Mic join_mic(const Key& key, std::span<const std::uint8_t> msg) {
  Block tag = aes_cmac(key, msg);
  return {tag[0], tag[1], tag[2], tag[3]};
}

std::vector<std::uint8_t> crypt_payload(const Key& key, std::span<const std::uint8_t> payload, Direction dir,
                                        std::uint32_t dev_addr, std::uint32_t fcnt) {
  std::vector<std::uint8_t> out(payload.begin(), payload.end());
  Block a{};
  a[0] = 0x01;
  a[5] = static_cast<std::uint8_t>(dir);
  put_le32(&a[6], dev_addr);
  put_le32(&a[10], fcnt);
  for (std::size_t off = 0, i = 1; off < out.size(); off += 16, ++i) {
    a[15] = static_cast<std::uint8_t>(i);
    const Block s = aes_encrypt(key, a);
    for (std::size_t j = 0; j < 16 && off + j < out.size(); ++j) out[off + j] ^= s[j];
  }
  return out;
}

SessionKeys derive_session_keys(const Key& app_key, std::uint32_t app_nonce, std::uint32_t net_id,
                                std::uint16_t dev_nonce) {
  Block b{};
  for (int i = 0; i < 3; ++i) {
    b[1 + i] = static_cast<std::uint8_t>(app_nonce >> (8 * i));
    b[4 + i] = static_cast<std::uint8_t>(net_id >> (8 * i));
  }
  b[7] = static_cast<std::uint8_t>(dev_nonce);
  b[8] = static_cast<std::uint8_t>(dev_nonce >> 8);
  SessionKeys keys;
  b[0] = 0x01;
  keys.nwk_skey = aes_encrypt(app_key, b);
  b[0] = 0x02;
  keys.app_skey = aes_encrypt(app_key, b);
  return keys;
}

namespace {

std::vector<std::uint8_t> accept_blocks(const Key& key, std::span<const std::uint8_t> in, bool device_side) {
  if (in.size() != 16 && in.size() != 32) {
    throw ArgumentError("join accept body must be 16 or 32 bytes, got " + std::to_string(in.size()));
  }
  std::vector<std::uint8_t> out(in.size());
  for (std::size_t off = 0; off < in.size(); off += 16) {
    Block b{};
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(off), 16, b.begin());
    const Block r = device_side ? aes_encrypt(key, b) : aes_decrypt(key, b);
    std::copy(r.begin(), r.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> join_accept_encrypt(const Key& app_key, std::span<const std::uint8_t> body) {
  return accept_blocks(app_key, body, false);
}

std::vector<std::uint8_t> join_accept_decrypt(const Key& app_key, std::span<const std::uint8_t> wire_body) {
  return accept_blocks(app_key, wire_body, true);
}

}  // namespace lorasim::lorawan
