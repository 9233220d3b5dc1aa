#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lorasim {

/// Lowercase hex, two digits per byte.
std::string to_hex(std::span<const std::uint8_t> bytes);
/// Accepts upper or lower case; throws ArgumentError on odd length or non-hex digits.
std::vector<std::uint8_t> from_hex(std::string_view text);

}  // namespace lorasim
