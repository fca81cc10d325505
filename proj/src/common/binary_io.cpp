#include "kdial/common/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "kdial/common/checksum.hpp"

namespace kdial {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

void write_checked_file(const std::string& path, std::vector<unsigned char> payload) {
  const std::uint32_t crc = crc32(payload);
  const auto* p = reinterpret_cast<const unsigned char*>(&crc);
  payload.insert(payload.end(), p, p + sizeof(crc));
  write_file_bytes(path, payload);
}

std::vector<unsigned char> read_checked_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  if (bytes.size() < sizeof(std::uint32_t)) {
    throw FormatError(path + ": file too short for checksum");
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored), sizeof(stored));
  bytes.resize(bytes.size() - sizeof(stored));
  const std::uint32_t actual = crc32(bytes);
  if (stored != actual) {
    throw FormatError(path + ": checksum mismatch (stored " + to_hex32(stored) + ", computed " + to_hex32(actual) +
                      ")");
  }
  return bytes;
}

}  // namespace kdial
