#include "esvr/config.hpp"

#include <algorithm>
#include <map>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "esvr/backends.hpp"
#include "esvr/error.hpp"
#include "esvr/jsonl.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {

constexpr const char* kModule = "cli_app";

enum class Kind { Int, Float, Bool, String, IntOrAll, StrList, IntList };

struct KeySpec {
  std::string key;
  Kind kind;
  json def;  // null: unset by default
};

const std::vector<KeySpec>& static_keys() {
  static const std::vector<KeySpec> keys = {
      {"run.seed", Kind::Int, 0},
      {"run.jobs", Kind::Int, 1},
      {"run.backend_profile", Kind::String, "mock"},
      {"cache.dir", Kind::String, ".esvr-cache"},
      {"cache.enabled", Kind::Bool, true},
      {"mining.setting", Kind::String, "single"},
      {"mining.min_score", Kind::Int, 1},
      {"mining.min_upvote_ratio", Kind::Float, 0.7},
      {"mining.min_length", Kind::Int, nullptr},
      {"mining.max_length", Kind::Int, nullptr},
      {"mining.positivity_threshold", Kind::Float, 0.5},
      {"mining.target_floor", Kind::Float, 0.5},
      {"mining.max_targets", Kind::Int, 3},
      {"mining.window", Kind::Int, 4},
      {"mining.binarize_threshold", Kind::Float, 0.5},
      {"personas.limit", Kind::Int, nullptr},
      {"personas.alignment_samples", Kind::Int, 1},
      {"personas.emotion_votes", Kind::Int, 5},
      {"personas.split", Kind::String, ""},
      {"simulation.turn_cap", Kind::Int, 20},
      {"simulation.with_alternatives", Kind::Bool, true},
      {"simulation.rollout_horizon", Kind::IntOrAll, 3},
      {"simulation.example_dialogue", Kind::String, ""},
      {"simulation.relief_threshold", Kind::Float, 0.6},
      {"simulation.gratitude", Kind::StrList, TerminationRules{}.gratitude},
      {"reward.kind", Kind::String, "value"},
      {"reward.h", Kind::IntOrAll, nullptr},
      {"reward.gamma", Kind::Float, nullptr},
      {"reward.t_diff", Kind::Float, nullptr},
      {"reward.binarize_threshold", Kind::Float, 0.5},
      {"reward.positivity_gate", Kind::Float, nullptr},
      {"reward.judge_samples", Kind::Int, 10},
      {"eval.metrics", Kind::StrList, known_metrics()},
      {"eval.value_samples", Kind::Int, 10},
      {"eval.positivity_threshold", Kind::Float, 0.5},
      {"eval.binarize_threshold", Kind::Float, 0.5},
      {"eval.valid_turns", Kind::IntList, std::vector<int>{1, 2, 3}},
  };
  return keys;
}

const std::map<std::string, Kind>& backend_fields() {
  static const std::map<std::string, Kind> f = {
      {"kind", Kind::String},        {"base_url", Kind::String},    {"model", Kind::String},
      {"auth_env", Kind::String},    {"timeout_s", Kind::Float},    {"max_retries", Kind::Int},
      {"max_concurrency", Kind::Int}, {"backoff_ms", Kind::Int},
  };
  return f;
}

const std::map<std::string, Kind>& role_fields() {
  static const std::map<std::string, Kind> f = {
      {"backend", Kind::String}, {"model", Kind::String}, {"temperature", Kind::Float}, {"max_tokens", Kind::Int}};
  return f;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Int: return "integer";
    case Kind::Float: return "float";
    case Kind::Bool: return "boolean";
    case Kind::String: return "string";
    case Kind::IntOrAll: return "integer or \"all\"";
    case Kind::StrList: return "array of strings";
    case Kind::IntList: return "array of integers";
  }
  return "?";
}

json checked(Kind kind, const json& v, const std::string& path) {
  auto mismatch = [&]() -> ConfigError {
    return ConfigError(kModule, path + ": expected " + kind_name(kind) + ", got " + v.type_name());
  };
  switch (kind) {
    case Kind::Int:
      if (!v.is_number_integer()) throw mismatch();
      return v;
    case Kind::Float:
      if (!v.is_number()) throw mismatch();
      return v.get<double>();
    case Kind::Bool:
      if (!v.is_boolean()) throw mismatch();
      return v;
    case Kind::String:
      if (!v.is_string()) throw mismatch();
      return v;
    case Kind::IntOrAll:
      if (v.is_number_integer() || (v.is_string() && v.get<std::string>() == "all")) return v;
      throw mismatch();
    case Kind::StrList:
      if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); }))
        throw mismatch();
      return v;
    case Kind::IntList:
      if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); }))
        throw mismatch();
      return v;
  }
  throw mismatch();
}

std::optional<std::string> closest(const std::string& word, const std::vector<std::string>& candidates) {
  std::optional<std::string> best;
  std::size_t best_d = std::max<std::size_t>(2, word.size() / 3) + 1;
  for (const auto& c : candidates) {
    std::size_t d = util::edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

[[noreturn]] void unknown_key(const std::string& path, const std::string& word, const std::vector<std::string>& cands,
                              const std::string& prefix = "") {
  std::string msg = "unknown key '" + path + "'";
  if (auto s = closest(word, cands)) msg += " (did you mean '" + prefix + *s + "'?)";
  throw ConfigError(kModule, msg);
}

template <typename M>
std::vector<std::string> keys_of(const M& m) {
  std::vector<std::string> out;
  for (const auto& [k, _] : m) out.push_back(k);
  return out;
}

Kind spec_for(const std::string& path) {
  auto parts = util::split(path, '.');
  if (!parts.empty() && (parts[0] == "backends" || parts[0] == "roles")) {
    const bool backends = parts[0] == "backends";
    if (parts.size() != 3)
      throw ConfigError(kModule, "unknown key '" + path + "': expected " + parts[0] + ".<name>.<field>");
    if (!backends && std::find(pipeline_roles().begin(), pipeline_roles().end(), parts[1]) == pipeline_roles().end())
      unknown_key(path, parts[1], pipeline_roles(), "roles.");
    const auto& fields = backends ? backend_fields() : role_fields();
    auto it = fields.find(parts[2]);
    if (it == fields.end()) unknown_key(path, parts[2], keys_of(fields), parts[0] + "." + parts[1] + ".");
    return it->second;
  }
  for (const auto& k : static_keys())
    if (k.key == path) return k.kind;
  std::vector<std::string> all;
  for (const auto& k : static_keys()) all.push_back(k.key);
  unknown_key(path, path, all);
}

json::json_pointer pointer(std::string_view dotted) {
  std::string p;
  for (const auto& part : util::split(std::string(dotted), '.')) p += "/" + part;
  return json::json_pointer(p);
}

json toml_to_json(const toml::node& n, const std::string& path) {
  if (auto t = n.as_table()) {
    json o = json::object();
    for (auto&& [k, v] : *t) {
      std::string key(k.str());
      o[key] = toml_to_json(v, path.empty() ? key : path + "." + key);
    }
    return o;
  }
  if (auto a = n.as_array()) {
    json arr = json::array();
    for (auto&& e : *a) arr.push_back(toml_to_json(e, path));
    return arr;
  }
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_string()) return v->get();
  throw ConfigError(kModule, path + ": unsupported value type");
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    return;
  }
  out.emplace_back(prefix, j);
}

json defaults() {
  json d = json::object();
  for (const auto& k : static_keys())
    if (!k.def.is_null()) d[pointer(k.key)] = k.def;
  d["backends"]["mock"] = {{"kind", "synthetic"}, {"model", "synthetic"}};
  for (const auto& r : pipeline_roles()) {
    d["roles"][r] = {{"backend", "mock"}, {"temperature", r == "judge" ? 1.0 : 0.7}, {"max_tokens", 1024}};
  }
  return d;
}

void set_value(json& values, const std::string& key, const json& v) {
  Kind k = spec_for(key);
  values[pointer(key)] = checked(k, v, key);
}

std::int64_t get_int(const Config& c, std::string_view k) { return c.at(k).get<std::int64_t>(); }
double get_double(const Config& c, std::string_view k) { return c.at(k).get<double>(); }
std::string get_string(const Config& c, std::string_view k) { return c.at(k).get<std::string>(); }
std::optional<int> int_or_all(const Config& c, std::string_view k) {
  const json& v = c.at(k);
  if (v.is_string()) return std::nullopt;
  return v.get<int>();
}

}  // namespace

bool Config::has(std::string_view dotted) const { return values.contains(pointer(dotted)); }

const json& Config::at(std::string_view dotted) const {
  if (!has(dotted)) throw ConfigError(kModule, "config key '" + std::string(dotted) + "' is not set");
  return values.at(pointer(dotted));
}

std::string Config::hash() const { return util::sha256_hex(dump_line(values)); }

const std::vector<std::string>& pipeline_roles() {
  static const std::vector<std::string> r = {"tvd", "rg", "supporter", "seeker", "sentiment", "values", "judge", "persona"};
  return r;
}

std::vector<std::string> known_config_keys() {
  std::vector<std::string> out;
  for (const auto& k : static_keys()) out.push_back(k.key);
  for (const auto& [f, _] : backend_fields()) out.push_back("backends.<name>." + f);
  for (const auto& [f, _] : role_fields()) out.push_back("roles.<role>." + f);
  return out;
}

Config parse_config(std::string_view toml_text, const std::vector<ConfigOverride>& overrides,
                    const std::string& source_name) {
  json file;
  try {
    auto tbl = toml::parse(toml_text, source_name);
    file = toml_to_json(tbl, "");
  } catch (const toml::parse_error& e) {
    throw ConfigError(kModule, source_name + ":" + std::to_string(e.source().begin.line) + ": " +
                                   std::string(e.description()));
  }
  Config cfg;
  cfg.values = defaults();
  std::vector<std::pair<std::string, json>> leaves;
  flatten(file, "", leaves);
  for (const auto& [k, v] : leaves) set_value(cfg.values, k, v);
  for (const auto& o : overrides) set_value(cfg.values, o.key, o.value);
  return cfg;
}

Config load_config(const std::optional<std::filesystem::path>& path, const std::vector<ConfigOverride>& overrides) {
  if (!path) return parse_config("", overrides);
  if (!std::filesystem::exists(*path)) throw FileNotFound(kModule, path->string());
  Config cfg = parse_config(util::read_file(*path), overrides, path->string());
  cfg.source = *path;
  return cfg;
}

std::optional<BackendProfile> parse_backend_profile(std::string_view s) {
  if (s == "mock") return BackendProfile::Mock;
  if (s == "live") return BackendProfile::Live;
  return std::nullopt;
}

void configure_gateway(Gateway& gw, const Config& cfg, BackendProfile profile) {
  const int jobs = static_cast<int>(get_int(cfg, "run.jobs"));
  if (profile == BackendProfile::Mock) {
    BackendConfig bc;
    bc.name = "mock";
    bc.kind = "synthetic";
    bc.model = "synthetic";
    bc.max_concurrency = std::max(1, jobs);
    gw.add_backend(bc, std::make_shared<SyntheticBackend>());
  } else {
    for (auto it = cfg.values["backends"].begin(); it != cfg.values["backends"].end(); ++it) {
      const json& b = it.value();
      BackendConfig bc;
      bc.name = it.key();
      bc.kind = b.value("kind", bc.kind);
      bc.base_url = b.value("base_url", bc.base_url);
      bc.model = b.value("model", bc.model);
      bc.auth_env = b.value("auth_env", bc.auth_env);
      bc.timeout_s = b.value("timeout_s", bc.timeout_s);
      bc.max_retries = b.value("max_retries", bc.max_retries);
      bc.max_concurrency = b.value("max_concurrency", bc.max_concurrency);
      bc.backoff_ms = b.value("backoff_ms", bc.backoff_ms);
      if (bc.kind != "synthetic" && bc.base_url.empty())
        throw ConfigError(kModule, "backends." + bc.name + ".base_url must be set");
      if (bc.max_retries < 1 || bc.max_concurrency < 1 || bc.backoff_ms < 0 || !(bc.timeout_s > 0))
        throw ConfigError(kModule, "backends." + bc.name + ": limits must be positive");
      gw.add_backend(bc, make_backend(bc));
    }
  }
  for (const auto& role : pipeline_roles()) {
    const json& r = cfg.values["roles"][role];
    RoleBinding rb;
    rb.backend = profile == BackendProfile::Mock ? "mock" : r.value("backend", std::string());
    rb.model = r.value("model", std::string());
    rb.temperature = r.value("temperature", rb.temperature);
    rb.max_tokens = r.value("max_tokens", rb.max_tokens);
    if (!gw.has_backend(rb.backend))
      throw ConfigError(kModule, "roles." + role + ".backend: unknown backend '" + rb.backend + "'");
    if (profile == BackendProfile::Live && gw.backend_config(rb.backend).kind == "synthetic")
      throw ConfigError(kModule, "roles." + role + ".backend: '" + rb.backend +
                                     "' is synthetic; bind a live backend or use the mock profile");
    if (rb.temperature < 0 || rb.max_tokens < 1)
      throw ConfigError(kModule, "roles." + role + ": temperature must be >= 0 and max_tokens >= 1");
    gw.bind_role(role, rb);
  }
}

QualityFilter quality_filter(const Config& cfg) {
  QualityFilter f;
  f.min_score = get_int(cfg, "mining.min_score");
  f.min_upvote_ratio = get_double(cfg, "mining.min_upvote_ratio");
  if (cfg.has("mining.min_length")) f.min_length = static_cast<std::size_t>(std::max<std::int64_t>(0, get_int(cfg, "mining.min_length")));
  if (cfg.has("mining.max_length")) f.max_length = static_cast<std::size_t>(std::max<std::int64_t>(0, get_int(cfg, "mining.max_length")));
  f.validate();
  return f;
}

Setting mining_setting(const Config& cfg) {
  auto s = parse_setting(get_string(cfg, "mining.setting"));
  if (!s) throw ConfigError(kModule, "mining.setting: expected 'single' or 'multi'");
  return *s;
}

MiningParams mining_params(const Config& cfg) {
  MiningParams p;
  p.positivity_threshold = get_double(cfg, "mining.positivity_threshold");
  p.target_floor = get_double(cfg, "mining.target_floor");
  p.max_targets = static_cast<int>(get_int(cfg, "mining.max_targets"));
  if (p.max_targets < 1 || p.max_targets > 3) throw ConfigError(kModule, "mining.max_targets must be in 1..3");
  return p;
}

EffectivenessParams effectiveness_params(const Config& cfg) {
  EffectivenessParams p;
  p.window = static_cast<int>(get_int(cfg, "mining.window"));
  p.positivity_threshold = get_double(cfg, "mining.positivity_threshold");
  p.binarize_threshold = get_double(cfg, "mining.binarize_threshold");
  if (p.window < 1) throw ConfigError(kModule, "mining.window must be >= 1");
  return p;
}

PersonaParams persona_params(const Config& cfg) {
  PersonaParams p;
  if (cfg.has("personas.limit")) {
    auto l = get_int(cfg, "personas.limit");
    if (l < 1) throw ConfigError(kModule, "personas.limit must be >= 1");
    p.limit = static_cast<std::size_t>(l);
  }
  p.alignment_samples = static_cast<int>(get_int(cfg, "personas.alignment_samples"));
  p.emotion_votes = static_cast<int>(get_int(cfg, "personas.emotion_votes"));
  if (p.alignment_samples < 1 || p.emotion_votes < 1)
    throw ConfigError(kModule, "personas.alignment_samples and personas.emotion_votes must be >= 1");
  p.jobs = static_cast<int>(get_int(cfg, "run.jobs"));
  p.seed = static_cast<std::uint64_t>(get_int(cfg, "run.seed"));
  std::string split = get_string(cfg, "personas.split");
  if (!split.empty()) {
    try {
      p.split = parse_split(split);
    } catch (const InvalidArgument& e) {
      throw ConfigError(kModule, std::string("personas.split: ") + e.what());
    }
  }
  return p;
}

SimulationParams simulation_params(const Config& cfg, const std::filesystem::path& base) {
  SimulationParams p;
  p.turn_cap = static_cast<int>(get_int(cfg, "simulation.turn_cap"));
  if (p.turn_cap < 1) throw ConfigError(kModule, "simulation.turn_cap must be >= 1");
  p.with_alternatives = cfg.at("simulation.with_alternatives").get<bool>();
  p.rollout_horizon = int_or_all(cfg, "simulation.rollout_horizon");
  if (p.rollout_horizon && *p.rollout_horizon < 1)
    throw ConfigError(kModule, "simulation.rollout_horizon must be >= 1 or \"all\"");
  p.rules.relief_threshold = get_double(cfg, "simulation.relief_threshold");
  p.rules.gratitude = cfg.at("simulation.gratitude").get<std::vector<std::string>>();
  std::filesystem::path example = get_string(cfg, "simulation.example_dialogue");
  if (example.empty())
    example = std::filesystem::path(ESVR_DATA_DIR) / "seeker_example.txt";
  else if (example.is_relative())
    example = base / example;
  if (!std::filesystem::exists(example)) throw FileNotFound(kModule, example.string());
  p.example_dialogue = util::trim(util::read_file(example));
  return p;
}

RewardKind reward_kind(const Config& cfg) {
  auto k = parse_reward_kind(get_string(cfg, "reward.kind"));
  if (!k) throw ConfigError(kModule, "reward.kind: expected 'value' or 'emotion'");
  return *k;
}

RewardParams reward_params(const Config& cfg) {
  RewardParams p = reward_kind(cfg) == RewardKind::Value ? RewardParams::value_preset() : RewardParams::emotion_preset();
  if (cfg.has("reward.h")) p.h = int_or_all(cfg, "reward.h");
  if (cfg.has("reward.gamma")) p.gamma = get_double(cfg, "reward.gamma");
  if (cfg.has("reward.t_diff")) p.t_diff = get_double(cfg, "reward.t_diff");
  p.binarize_threshold = get_double(cfg, "reward.binarize_threshold");
  if (cfg.has("reward.positivity_gate")) p.positivity_gate = get_double(cfg, "reward.positivity_gate");
  p.judge_samples = static_cast<int>(get_int(cfg, "reward.judge_samples"));
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(kModule, std::string("reward: ") + e.what());
  }
  return p;
}

EvalOptions eval_options(const Config& cfg) {
  EvalOptions o;
  auto metrics = cfg.at("eval.metrics").get<std::vector<std::string>>();
  o.metrics = std::set<std::string>(metrics.begin(), metrics.end());
  o.value_samples = static_cast<int>(get_int(cfg, "eval.value_samples"));
  o.positivity_threshold = get_double(cfg, "eval.positivity_threshold");
  o.binarize_threshold = get_double(cfg, "eval.binarize_threshold");
  o.valid_turns = cfg.at("eval.valid_turns").get<std::vector<int>>();
  o.jobs = static_cast<int>(get_int(cfg, "run.jobs"));
  try {
    o.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(kModule, std::string("eval: ") + e.what());
  }
  return o;
}

}  // namespace esvr
