#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stereoind::io {

std::string read_file(const std::filesystem::path& path);
// Writes atomically (temp file + rename); creates parent directories.
void write_file(const std::filesystem::path& path, const std::string& contents);

// One JSON value per non-blank line. Errors carry the 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

template <typename Json>
std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

}  // namespace stereoind::io
