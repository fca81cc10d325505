#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>

#include "kdial/common/checksum.hpp"
#include "kdial/common/error.hpp"
#include "kdial/common/jsonl.hpp"

namespace kdial::cli {

FileDigest digest(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ValidationError("not a file: " + path);
  return {path, file_crc32_hex(path), std::filesystem::file_size(path)};
}

namespace {

nlohmann::json digests(const std::vector<std::string>& paths) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : paths) {
    const auto d = digest(p);
    out.push_back({{"path", d.path}, {"crc32", d.crc32}, {"bytes", d.bytes}});
  }
  return out;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json make_manifest(const std::string& subcommand, const std::vector<std::string>& args, std::uint64_t seed,
                             const RunRecord& record, double elapsed_seconds) {
  return {{"tool", "kdial"},
          {"version", kVersion},
          {"subcommand", subcommand},
          {"args", args},
          {"seed", seed},
          {"deterministic", record.deterministic},
          {"inputs", digests(record.inputs)},
          {"outputs", digests(record.outputs)},
          {"details", record.details},
          {"finished_utc", utc_now()},
          {"elapsed_seconds", elapsed_seconds}};
}

void write_manifest(const std::string& path, const nlohmann::json& manifest) {
  write_text_file(path, manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace kdial::cli
