#include "sprint/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sprint/errors.hpp"
#include "sprint/rng.hpp"

namespace sprint {

using nlohmann::json;

std::string manifest_to_json(const RunManifest& manifest) {
  json root{{"command", manifest.command},
            {"options", manifest.options},
            {"input_checksums", manifest.input_checksums},
            {"seed", manifest.seed},
            {"tool_version", manifest.tool_version},
            {"wall_clock_seconds", manifest.wall_clock_seconds}};
  return root.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("manifest JSON: ") + e.what());
  }
  RunManifest m;
  m.command = root.at("command").get<std::string>();
  m.options = root.at("options").get<std::map<std::string, std::string>>();
  m.input_checksums = root.at("input_checksums").get<std::map<std::string, std::string>>();
  m.seed = root.at("seed").get<uint64_t>();
  m.tool_version = root.at("tool_version").get<std::string>();
  m.wall_clock_seconds = root.at("wall_clock_seconds").get<double>();
  return m;
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(manifest);
  if (!out) throw io_error("failed while writing '" + path.string() + "'");
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

std::string file_checksum_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "' for checksumming");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

std::vector<std::string> manifest_checksum_mismatches(const RunManifest& manifest) {
  std::vector<std::string> mismatched;
  for (const auto& [path, expected] : manifest.input_checksums) {
    if (file_checksum_hex(path) != expected) mismatched.push_back(path);
  }
  return mismatched;
}

}  // namespace sprint
