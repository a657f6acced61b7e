#pragma once

// Resolved run configuration. Layers: built-in defaults < TOML file < CLI
// overrides. Credentials are never stored; backends name the env var that
// holds their token and read it per request.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esvr/eval_bench.hpp"
#include "esvr/gateway.hpp"
#include "esvr/persona_factory.hpp"
#include "esvr/preference.hpp"
#include "esvr/simulation.hpp"
#include "esvr/thread_miner.hpp"

namespace esvr {

using json = nlohmann::json;

// Dotted key ("reward.gamma") and a typed value.
struct ConfigOverride {
  std::string key;
  json value;
};

struct Config {
  json values;  // nested by section; unset optionals are absent
  std::optional<std::filesystem::path> source;

  bool has(std::string_view dotted) const;
  // Throws ConfigError for an unset key.
  const json& at(std::string_view dotted) const;
  // sha256 of the canonical JSON encoding.
  std::string hash() const;
};

// Unknown keys raise ConfigError naming the key and, when one is close, the
// key it was probably meant to be. Type mismatches name the full key path.
Config parse_config(std::string_view toml_text, const std::vector<ConfigOverride>& overrides = {},
                    const std::string& source_name = "<config>");
// A missing file raises FileNotFound.
Config load_config(const std::optional<std::filesystem::path>& path,
                   const std::vector<ConfigOverride>& overrides = {});

// All statically known dotted keys, for help output and suggestions.
std::vector<std::string> known_config_keys();
// Roles the pipeline binds: tvd, rg, supporter, seeker, sentiment, values, judge, persona.
const std::vector<std::string>& pipeline_roles();

enum class BackendProfile { Mock, Live };
std::optional<BackendProfile> parse_backend_profile(std::string_view s);

// Registers backends and role bindings. The mock profile binds every role to
// the synthetic backend; the live profile uses the configured bindings and
// refuses roles left on a synthetic backend.
void configure_gateway(Gateway& gw, const Config& cfg, BackendProfile profile);

QualityFilter quality_filter(const Config& cfg);
Setting mining_setting(const Config& cfg);
MiningParams mining_params(const Config& cfg);
EffectivenessParams effectiveness_params(const Config& cfg);
PersonaParams persona_params(const Config& cfg);
// `base` resolves a relative example-dialogue path.
SimulationParams simulation_params(const Config& cfg, const std::filesystem::path& base);
RewardKind reward_kind(const Config& cfg);
// Unset reward keys fall back to the preset of the configured reward kind.
RewardParams reward_params(const Config& cfg);
EvalOptions eval_options(const Config& cfg);

}  // namespace esvr
