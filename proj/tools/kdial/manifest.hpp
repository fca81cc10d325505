#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kdial::cli {

inline constexpr const char* kVersion = "0.1.0";

// Files a subcommand read and wrote, and whether re-running it reproduces the outputs.
struct RunRecord {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  bool deterministic = true;
  nlohmann::json details = nlohmann::json::object();
};

struct FileDigest {
  std::string path;
  std::string crc32;
  std::uintmax_t bytes = 0;
};

FileDigest digest(const std::string& path);

nlohmann::json make_manifest(const std::string& subcommand, const std::vector<std::string>& args, std::uint64_t seed,
                             const RunRecord& record, double elapsed_seconds);
void write_manifest(const std::string& path, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::string& path);

}  // namespace kdial::cli
