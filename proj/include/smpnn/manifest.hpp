#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace smpnn {

/// Provenance record written beside every CSV a command emits.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string dataset_fingerprint;
  std::string timestamp;
  std::string tool_version;
  std::map<std::string, double> results;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  void write(const std::filesystem::path& path) const;
};

std::string utc_timestamp();

}  // namespace smpnn
