#include "esvr/manifest.hpp"

#include "esvr/corpus.hpp"
#include "esvr/error.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "cli_app";
}

json to_json(const RunManifest& m) {
  return json{{"schema", schema::kManifest},
              {"command", m.command},
              {"seed", m.seed},
              {"config_hash", m.config_hash},
              {"config", m.config},
              {"inputs", m.inputs},
              {"outputs", m.outputs},
              {"counts", m.counts},
              {"details", m.details},
              {"wall_time_s", m.wall_time_s},
              {"cache", {{"hits", m.cache.cache_hits}, {"misses", m.cache.cache_misses}, {"backend_calls", m.cache.backend_calls}}}};
}

RunManifest manifest_from_json(const json& j) {
  schema::expect(j, schema::kManifest);
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
    m.details = j.value("details", json::object());
    m.wall_time_s = j.at("wall_time_s").get<double>();
    const json& c = j.at("cache");
    m.cache.cache_hits = c.at("hits").get<std::uint64_t>();
    m.cache.cache_misses = c.at("misses").get<std::uint64_t>();
    m.cache.backend_calls = c.at("backend_calls").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw SchemaError(kModule, "manifest", e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  util::write_file_atomic(path, to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFound(kModule, path.string());
  json j;
  try {
    j = json::parse(util::read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(kModule, "<json>", e.what());
  }
  return manifest_from_json(j);
}

std::vector<std::string> verify_manifest(const RunManifest& m, const std::filesystem::path& workdir) {
  std::vector<std::string> problems;
  auto check = [&](const std::map<std::string, std::string>& files) {
    for (const auto& [rel, digest] : files) {
      auto p = workdir / rel;
      if (!std::filesystem::exists(p)) {
        problems.push_back(rel + ": missing");
      } else if (util::file_sha256(p) != digest) {
        problems.push_back(rel + ": digest mismatch");
      }
    }
  };
  check(m.inputs);
  check(m.outputs);
  return problems;
}

}  // namespace esvr
