#include "esvr/gateway.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

#include "esvr/error.hpp"
#include "esvr/jsonl.hpp"
#include "esvr/util.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "model_gateway";

bool retriable(const BackendError& e) { return e.status() == 429 || e.status() >= 500; }
}  // namespace

struct Gateway::Slot {
  BackendConfig cfg;
  std::shared_ptr<Backend> backend;
  std::mutex m;
  std::condition_variable cv;
  int in_flight = 0;
  std::size_t peak = 0;
};

void validate(const ChatRequest& req) {
  if (req.messages.empty()) throw InvalidArgument(kModule, "chat request has no messages");
  for (const auto& m : req.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      throw InvalidArgument(kModule, "unknown message role '" + m.role + "'");
  }
  if (!(req.temperature >= 0.0)) throw InvalidArgument(kModule, "temperature must be >= 0");
  if (req.max_tokens <= 0) throw InvalidArgument(kModule, "max_tokens must be positive");
  if (req.sample_index < 0) throw InvalidArgument(kModule, "sample_index must be nonnegative");
}

json chat_payload(const ChatRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j{{"model", req.model}, {"messages", std::move(msgs)}, {"temperature", req.temperature},
         {"max_tokens", req.max_tokens}};
  if (req.seed) j["seed"] = *req.seed;
  return j;
}

std::string cache_key(const std::string& backend_id, const std::string& model, const std::string& endpoint,
                      const json& payload, int sample_index) {
  json k{{"backend", backend_id},
         {"model", model},
         {"endpoint", endpoint},
         {"payload", payload},
         {"sample_index", sample_index}};
  return util::sha256_hex(dump_line(k));
}

Gateway::Gateway() : Gateway(Options{}) {}

Gateway::Gateway(Options opts) : opts_(std::move(opts)) {
  sink_ = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
}

Gateway::~Gateway() = default;

void Gateway::add_backend(BackendConfig cfg, std::shared_ptr<Backend> backend) {
  if (cfg.name.empty()) throw ConfigError(kModule, "backend name must be nonempty");
  if (cfg.max_concurrency < 1) throw ConfigError(kModule, "backend " + cfg.name + ": max_concurrency must be >= 1");
  if (cfg.max_retries < 1) throw ConfigError(kModule, "backend " + cfg.name + ": max_retries must be >= 1");
  if (!backend) throw ConfigError(kModule, "backend " + cfg.name + " has no implementation");
  auto s = std::make_unique<Slot>();
  std::string name = cfg.name;
  s->cfg = std::move(cfg);
  s->backend = std::move(backend);
  backends_[name] = std::move(s);
}

bool Gateway::has_backend(const std::string& name) const { return backends_.count(name) > 0; }

Gateway::Slot& Gateway::slot(const std::string& backend) const {
  auto it = backends_.find(backend);
  if (it == backends_.end()) throw ConfigError(kModule, "unknown backend '" + backend + "'");
  return *it->second;
}

const BackendConfig& Gateway::backend_config(const std::string& name) const { return slot(name).cfg; }

void Gateway::bind_role(const std::string& role, RoleBinding binding) {
  if (!has_backend(binding.backend))
    throw ConfigError(kModule, "role '" + role + "' bound to unknown backend '" + binding.backend + "'");
  roles_[role] = std::move(binding);
}

bool Gateway::has_role(const std::string& role) const { return roles_.count(role) > 0; }

const RoleBinding& Gateway::role(const std::string& role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) throw ConfigError(kModule, "no backend bound to role '" + role + "'");
  return it->second;
}

void Gateway::set_warning_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard lk(mu_);
  sink_ = std::move(sink);
}

void Gateway::warn(const std::string& msg) {
  std::function<void(const std::string&)> sink;
  {
    std::lock_guard lk(mu_);
    warnings_.push_back(msg);
    sink = sink_;
  }
  if (sink) sink(std::string(kModule) + ": " + msg);
}

std::vector<std::string> Gateway::warnings() const {
  std::lock_guard lk(mu_);
  return warnings_;
}

GatewayStats Gateway::stats() const { return GatewayStats{hits_.load(), misses_.load(), calls_.load()}; }

std::size_t Gateway::peak_in_flight(const std::string& backend) const {
  Slot& s = slot(backend);
  std::lock_guard lk(s.m);
  return s.peak;
}

std::optional<json> Gateway::disk_get(const std::string& key) const {
  if (!opts_.cache_dir) return std::nullopt;
  auto path = *opts_.cache_dir / key.substr(0, 2) / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  json j = json::parse(util::read_file(path), nullptr, false);
  // A corrupt entry is treated as a miss and overwritten.
  if (j.is_discarded() || !j.contains("response")) return std::nullopt;
  return j["response"];
}

void Gateway::disk_put(const std::string& key, const json& value) const {
  if (!opts_.cache_dir) return;
  auto path = *opts_.cache_dir / key.substr(0, 2) / (key + ".json");
  util::write_file_atomic(path, dump_line(json{{"key", key}, {"response", value}}) + "\n");
}

json Gateway::call_with_retries(Slot& s, const BackendRequest& req) {
  const int attempts = s.cfg.max_retries;
  for (int attempt = 0;; ++attempt) {
    {
      std::unique_lock lk(s.m);
      s.cv.wait(lk, [&] { return s.in_flight < s.cfg.max_concurrency; });
      ++s.in_flight;
      s.peak = std::max<std::size_t>(s.peak, static_cast<std::size_t>(s.in_flight));
    }
    struct Release {
      Slot& s;
      ~Release() {
        {
          std::lock_guard lk(s.m);
          --s.in_flight;
        }
        s.cv.notify_one();
      }
    };
    bool retry = false;
    std::string why;
    try {
      Release release{s};
      ++calls_;
      return s.backend->call(req);
    } catch (const BackendUnavailable& e) {
      if (attempt + 1 >= attempts)
        throw BackendUnavailable(kModule, "backend " + s.cfg.name + " unavailable after " + std::to_string(attempts) +
                                              " attempts: " + e.what());
      retry = true;
      why = e.what();
    } catch (const BackendError& e) {
      if (!retriable(e) || attempt + 1 >= attempts) throw;
      retry = true;
      why = e.what();
    }
    if (retry && opts_.sleep_on_retry) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(s.cfg.backoff_ms) << attempt));
    }
  }
}

json Gateway::fetch(const std::string& backend, const std::string& model, const std::string& endpoint,
                    const json& payload, int sample_index) {
  Slot& s = slot(backend);
  const std::string key = cache_key(s.cfg.name + "#" + s.cfg.kind, model, endpoint, payload, sample_index);

  std::promise<json> promise;
  {
    std::unique_lock lk(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
    if (auto it = in_flight_.find(key); it != in_flight_.end()) {
      auto fut = it->second;
      lk.unlock();
      ++hits_;
      return fut.get();
    }
    in_flight_.emplace(key, promise.get_future().share());
  }

  auto finish = [&](const json* value) {
    std::lock_guard lk(mu_);
    if (value) memory_.emplace(key, *value);
    in_flight_.erase(key);
  };

  try {
    json value;
    if (auto cached = disk_get(key)) {
      ++hits_;
      value = std::move(*cached);
    } else {
      ++misses_;
      value = call_with_retries(s, BackendRequest{endpoint, payload, sample_index});
      disk_put(key, value);
    }
    promise.set_value(value);
    finish(&value);
    return value;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish(nullptr);
    throw;
  }
}

std::string Gateway::generate(const ChatRequest& req) {
  validate(req);
  const Slot& s = slot(req.backend);
  ChatRequest r = req;
  if (r.model.empty()) r.model = s.cfg.model;
  json reply = fetch(r.backend, r.model, "chat", chat_payload(r), r.sample_index);
  if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string())
    throw SchemaError(kModule, "text", "chat reply from backend " + r.backend + " has no text");
  return reply["text"].get<std::string>();
}

std::vector<std::string> Gateway::judge_n(const ChatRequest& req, int n) {
  if (n < 1) throw InvalidArgument(kModule, "judge_n needs n >= 1, got " + std::to_string(n));
  std::vector<std::string> out(static_cast<std::size_t>(n));
  std::vector<int> failed;
  std::string first_error;
  for (int i = 0; i < n; ++i) {
    ChatRequest r = req;
    r.sample_index = i;
    try {
      out[static_cast<std::size_t>(i)] = generate(r);
    } catch (const BackendUnavailable& e) {
      failed.push_back(i);
      if (first_error.empty()) first_error = e.what();
    } catch (const BackendError& e) {
      failed.push_back(i);
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!failed.empty()) {
    std::vector<std::string> idx;
    for (int i : failed) idx.push_back(std::to_string(i));
    throw BackendUnavailable(kModule, "judge samples failed at indices [" + util::join(idx, ", ") +
                                          "]: " + first_error);
  }
  return out;
}

ChatRequest Gateway::request_for(const std::string& role_name, std::vector<ChatMessage> messages,
                                 int sample_index) const {
  const RoleBinding& b = role(role_name);
  ChatRequest r;
  r.backend = b.backend;
  r.model = b.model.empty() ? backend_config(b.backend).model : b.model;
  r.messages = std::move(messages);
  r.temperature = b.temperature;
  r.max_tokens = b.max_tokens;
  r.sample_index = sample_index;
  return r;
}

std::string Gateway::chat(const std::string& role_name, std::vector<ChatMessage> messages, int sample_index) {
  return generate(request_for(role_name, std::move(messages), sample_index));
}

std::vector<std::string> Gateway::chat_n(const std::string& role_name, std::vector<ChatMessage> messages, int n) {
  return judge_n(request_for(role_name, std::move(messages)), n);
}

double Gateway::score_sentiment(const std::string& text) { return score_sentiment(role("sentiment").backend, text); }

ValueProbVector Gateway::detect_values(const std::string& text) { return detect_values(role("values").backend, text); }

double Gateway::score_sentiment(const std::string& backend, const std::string& text) {
  const std::string model = backend_config(backend).model;
  json reply = fetch(backend, model, "sentiment", json{{"text", text}}, 0);
  if (!reply.is_object() || !reply.contains("score") || !reply["score"].is_number())
    throw SchemaError(kModule, "score", "sentiment reply from backend " + backend + " has no numeric score");
  double x = reply["score"].get<double>();
  if (std::isnan(x)) throw SchemaError(kModule, "score", "sentiment score is NaN");
  if (x < 0.0 || x > 1.0) {
    double c = std::clamp(x, 0.0, 1.0);
    warn("sentiment score " + std::to_string(x) + " clamped to " + std::to_string(c));
    x = c;
  }
  return x;
}

ValueProbVector Gateway::detect_values(const std::string& backend, const std::string& text) {
  const std::string model = backend_config(backend).model;
  json reply = fetch(backend, model, "values", json{{"text", text}}, 0);
  if (!reply.is_object() || !reply.contains("probabilities") || !reply["probabilities"].is_array())
    throw SchemaError(kModule, "probabilities", "value reply from backend " + backend + " has no probability array");
  const json& arr = reply["probabilities"];
  if (arr.size() != kValueCount)
    throw SchemaError(kModule, "probabilities",
                      "expected " + std::to_string(kValueCount) + " entries, got " + std::to_string(arr.size()));
  std::vector<double> probs;
  for (const auto& e : arr) {
    if (!e.is_number()) throw SchemaError(kModule, "probabilities", "non-numeric entry");
    double x = e.get<double>();
    if (std::isnan(x)) throw SchemaError(kModule, "probabilities", "NaN entry");
    probs.push_back(x);
  }
  bool changed = false;
  ValueProbVector v = ValueProbVector::clamped(probs, &changed);
  if (changed) warn("value probabilities from backend " + backend + " clamped into [0,1]");
  return v;
}

}  // namespace esvr
