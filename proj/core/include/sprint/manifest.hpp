#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sprint {

// Written next to every output artifact: enough to re-run the command and
// verify the inputs it saw.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> options;          // resolved flag -> value
  std::map<std::string, std::string> input_checksums;  // path -> fnv1a64 hex
  uint64_t seed = 0;
  std::string tool_version;
  double wall_clock_seconds = 0.0;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

std::string file_checksum_hex(const std::filesystem::path& path);

// Paths whose current checksum no longer matches the manifest.
std::vector<std::string> manifest_checksum_mismatches(const RunManifest& manifest);

}  // namespace sprint
