#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kdial {

using Json = nlohmann::json;

// Calls `fn` for each non-blank line of a JSON-lines file. Parse errors carry
// the file name and 1-based line number.
void for_each_jsonl(const std::string& path, const std::function<void(const Json&, std::size_t line)>& fn);
std::vector<Json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<Json>& rows);

std::vector<std::string> read_lines(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace kdial
