#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "esvr/app.hpp"
#include "esvr/config.hpp"
#include "esvr/error.hpp"
#include "esvr/jsonl.hpp"
#include "esvr/manifest.hpp"
#include "support.hpp"

using namespace esvr;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("config defaults, overrides and key errors") {
  auto cfg = parse_config("");
  CHECK(cfg.at("simulation.turn_cap") == 20);
  CHECK(cfg.at("run.backend_profile") == "mock");
  CHECK_FALSE(cfg.has("reward.gamma"));
  CHECK(reward_params(cfg).t_diff == 2.0);

  auto over = parse_config("[simulation]\nturn_cap = 7\n", {ConfigOverride{"simulation.turn_cap", 9}});
  CHECK(over.at("simulation.turn_cap") == 9);
  CHECK(over.hash() != cfg.hash());
  CHECK(parse_config("[reward]\nkind = \"emotion\"\n").at("reward.kind") == "emotion");
  CHECK(reward_params(parse_config("[reward]\nkind = \"emotion\"\n")).t_diff == 0.5);

  try {
    parse_config("[reward]\ngama = 0.9\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("reward.gama") != std::string::npos);
    CHECK(std::string(e.what()).find("reward.gamma") != std::string::npos);
  }
  try {
    parse_config("[reward]\ngamma = \"high\"\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("reward.gamma") != std::string::npos);
  }
  CHECK_THROWS_AS(reward_params(parse_config("[reward]\ngamma = 1.5\n")), ConfigError);
  CHECK_THROWS_AS(load_config(std::filesystem::path("/nonexistent/esvr.toml")), FileNotFound);
}

TEST_CASE("cli errors are one line with the documented exit codes") {
  test::TempDir dir;
  auto missing = cli({"--workdir", dir.path().string(), "simulate", "--personas", "nope.jsonl"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("corpus: file not found") == 0);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

  auto usage = cli({"simulate", "--bogus"});
  CHECK(usage.code == kExitUsage);
  CHECK(usage.err.find("usage:") == 0);
  CHECK(cli({}).code == kExitUsage);

  auto bad_cfg = cli({"--workdir", dir.path().string(), "--config", "missing.toml", "personas", "--limit", "1"});
  CHECK(bad_cfg.code == kExitUsage);
}

TEST_CASE("simulate is reproducible on a warm cache and its manifest verifies") {
  test::TempDir dir;
  const std::string wd = dir.path().string();
  REQUIRE(cli({"--workdir", wd, "personas", "--limit", "2", "--out", "personas.jsonl"}).code == kExitOk);
  CHECK(line_count(dir.path() / "personas.jsonl") == 2);

  auto first = cli({"--workdir", wd, "--jobs", "2", "simulate", "--personas", "personas.jsonl", "--out", "a.jsonl",
                    "--turn-cap", "3"});
  REQUIRE_MESSAGE(first.code == kExitOk, first.err);
  CHECK(line_count(dir.path() / "a.jsonl") == 2);
  auto second = cli({"--workdir", wd, "simulate", "--personas", "personas.jsonl", "--out", "b.jsonl", "--turn-cap",
                     "3"});
  REQUIRE(second.code == kExitOk);
  CHECK(util::file_sha256(dir.path() / "a.jsonl") == util::file_sha256(dir.path() / "b.jsonl"));

  auto m = read_manifest(dir.path() / "b.jsonl.manifest.json");
  CHECK(m.command == "simulate");
  CHECK(m.cache.cache_hits > 0);
  CHECK(m.outputs.count("b.jsonl") == 1);
  CHECK(verify_manifest(m, dir.path()).empty());
  CHECK(cli({"--workdir", wd, "report"}).code == kExitOk);

  std::ofstream(dir.path() / "b.jsonl", std::ios::app) << "\n";
  CHECK(verify_manifest(m, dir.path()) == std::vector<std::string>{"b.jsonl: digest mismatch"});
  CHECK(cli({"--workdir", wd, "report"}).code == kExitPipeline);
}
