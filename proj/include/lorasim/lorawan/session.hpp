#pragma once

#include <cstdint>

#include "lorasim/lorawan/crypto.hpp"

namespace lorasim::lorawan {

enum class DeviceClass { A, C };

const char* to_string(DeviceClass c);

struct OtaaCredentials {
  std::uint64_t app_eui = 0;
  std::uint64_t dev_eui = 0;
  Key app_key{};
  friend bool operator==(const OtaaCredentials&, const OtaaCredentials&) = default;
};

struct AbpCredentials {
  std::uint32_t dev_addr = 0;
  Key nwk_skey{};
  Key app_skey{};
  friend bool operator==(const AbpCredentials&, const AbpCredentials&) = default;
};

/// Downlink-only group address with its own session keys and counter.
struct MulticastGroup {
  std::uint32_t mc_addr = 0;
  Key mc_nwk_skey{};
  Key mc_app_skey{};
  std::uint32_t fcnt_down = 0;
};

}  // namespace lorasim::lorawan
