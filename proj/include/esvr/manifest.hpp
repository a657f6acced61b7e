#pragma once

// Run manifests: what a subcommand read and wrote, with content digests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esvr/gateway.hpp"

namespace esvr {

using json = nlohmann::json;

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_hash;
  json config;  // resolved configuration
  // Paths relative to the workdir -> sha256 of the file contents.
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::map<std::string, std::size_t> counts;
  json details = json::object();  // per-command bookkeeping
  double wall_time_s = 0.0;
  GatewayStats cache;
};

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

// Writes pretty JSON atomically.
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

// Recomputes every recorded digest relative to `workdir`; returns one message
// per missing or mismatching file.
std::vector<std::string> verify_manifest(const RunManifest& m, const std::filesystem::path& workdir);

}  // namespace esvr
