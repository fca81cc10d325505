#include "kdial/common/checksum.hpp"

#include <cstdio>

#include <zlib.h>

#include "kdial/common/binary_io.hpp"

namespace kdial {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed) {
  uLong crc = seed;
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32(std::string_view bytes, std::uint32_t seed) {
  return crc32(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()),
               seed);
}

std::string to_hex32(std::uint32_t value) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", value);
  return buf;
}

std::string file_crc32_hex(const std::string& path) { return to_hex32(crc32(read_file_bytes(path))); }

}  // namespace kdial
