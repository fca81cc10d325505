#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace kdial {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view bytes, std::uint32_t seed = 0);

// CRC-32 of a whole file as 8 lowercase hex digits.
std::string file_crc32_hex(const std::string& path);
std::string to_hex32(std::uint32_t value);

}  // namespace kdial
