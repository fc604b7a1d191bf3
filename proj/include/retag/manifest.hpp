#pragma once

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <string>

#include "json.hpp"
#include "retag/errors.hpp"
#include "retag/hashing.hpp"
#include "retag/version.hpp"

namespace retag {

// Reproducibility record written next to every command's primary outputs.
// Identical manifests imply identical outputs: everything that can influence
// a run (resolved configuration, input digests, seed, tool version) is in
// here. The timestamp honors SOURCE_DATE_EPOCH / RETAG_TIMESTAMP so
// deterministic pipelines can produce byte-identical manifests.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::uint64_t seed = 0;
  std::string tool_version = std::string(kToolVersion);
  std::string timestamp;
};

inline std::string manifest_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("RETAG_TIMESTAMP"); env && *env) {
    t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  } else if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json obj;
  obj["command"] = m.command;
  obj["config"] = m.config;
  obj["inputs"] = m.input_digests;
  obj["seed"] = m.seed;
  obj["tool_version"] = m.tool_version;
  obj["timestamp"] = m.timestamp;
  return obj;
}

inline void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot open '" + path + "' for writing");
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) fail(Errc::IoError, "failed writing '" + path + "'");
}

}  // namespace retag
