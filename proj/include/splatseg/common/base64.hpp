#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splatseg {

/// Standard (RFC 4648) alphabet with '=' padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Throws DataError on characters outside the alphabet or bad padding.
/// ASCII whitespace is skipped.
std::vector<std::uint8_t> base64_decode(std::string_view text);

} // namespace splatseg
