#include "smpnn/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <json.hpp>

#include "smpnn/error.hpp"

namespace smpnn {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["dataset_fingerprint"] = dataset_fingerprint;
  j["timestamp"] = timestamp;
  j["tool_version"] = tool_version;
  j["results"] = results;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    if (j.contains("results")) m.results = j.at("results").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("manifest: ") + e.what());
  }
  return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << to_json();
}

}  // namespace smpnn
