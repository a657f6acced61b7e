#pragma once

// Cached, rate-limited access to chat generators, the sentiment scorer and the
// value detector. All model traffic goes through a Gateway.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "esvr/value_core.hpp"

namespace esvr {

using json = nlohmann::json;

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string backend;
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 512;
  int sample_index = 0;
  std::optional<std::uint64_t> seed;
};

// Throws InvalidArgument on an empty message list, unknown role, negative
// temperature or non-positive max_tokens.
void validate(const ChatRequest& req);
json chat_payload(const ChatRequest& req);

struct BackendConfig {
  std::string name;
  std::string kind = "openai";  // openai | synthetic | scripted
  std::string base_url;
  std::string model;
  std::string auth_env;  // name of the env var holding the bearer token
  double timeout_s = 60.0;
  int max_retries = 3;  // total attempts
  int max_concurrency = 4;
  int backoff_ms = 200;
};

// One wire call. `endpoint` is "chat", "sentiment" or "values".
struct BackendRequest {
  std::string endpoint;
  json payload;
  int sample_index = 0;
};

// Replies are normalized to {"text": s}, {"score": x} or {"probabilities": [20]}.
// Implementations throw BackendUnavailable for transport failures and
// BackendError for non-2xx replies.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual json call(const BackendRequest& req) = 0;
};

// Role binding: which backend (and model override) serves a pipeline role.
struct RoleBinding {
  std::string backend;
  std::string model;  // empty: the backend's default model
  double temperature = 0.7;
  int max_tokens = 512;
};

struct GatewayStats {
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::uint64_t backend_calls = 0;  // attempts that reached a backend
};

// Content hash of (backend id, model, endpoint, payload, sample index).
std::string cache_key(const std::string& backend_id, const std::string& model, const std::string& endpoint,
                      const json& payload, int sample_index);

class Gateway {
 public:
  struct Options {
    std::optional<std::filesystem::path> cache_dir;  // none: memory only
    bool sleep_on_retry = true;
  };

  Gateway();
  explicit Gateway(Options opts);
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;
  ~Gateway();

  void add_backend(BackendConfig cfg, std::shared_ptr<Backend> backend);
  bool has_backend(const std::string& name) const;
  const BackendConfig& backend_config(const std::string& name) const;

  void bind_role(const std::string& role, RoleBinding binding);
  bool has_role(const std::string& role) const;
  const RoleBinding& role(const std::string& role) const;

  // Completion text. Identical requests are served from cache.
  std::string generate(const ChatRequest& req);
  // n completions at sample indices 0..n-1.
  std::vector<std::string> judge_n(const ChatRequest& req, int n);

  // Builds a request from a role binding.
  ChatRequest request_for(const std::string& role, std::vector<ChatMessage> messages, int sample_index = 0) const;
  std::string chat(const std::string& role, std::vector<ChatMessage> messages, int sample_index = 0);
  std::vector<std::string> chat_n(const std::string& role, std::vector<ChatMessage> messages, int n);

  // Uses the "sentiment" / "values" role bindings. Out-of-range outputs are
  // clamped into [0, 1] and a warning is recorded.
  double score_sentiment(const std::string& text);
  ValueProbVector detect_values(const std::string& text);
  double score_sentiment(const std::string& backend, const std::string& text);
  ValueProbVector detect_values(const std::string& backend, const std::string& text);

  GatewayStats stats() const;
  std::vector<std::string> warnings() const;
  // Highest number of simultaneous in-flight calls seen per backend.
  std::size_t peak_in_flight(const std::string& backend) const;

  void set_warning_sink(std::function<void(const std::string&)> sink);

 private:
  struct Slot;
  json fetch(const std::string& backend, const std::string& model, const std::string& endpoint, const json& payload,
             int sample_index);
  json call_with_retries(Slot& slot, const BackendRequest& req);
  std::optional<json> disk_get(const std::string& key) const;
  void disk_put(const std::string& key, const json& value) const;
  void warn(const std::string& msg);
  Slot& slot(const std::string& backend) const;

  Options opts_;
  std::map<std::string, std::unique_ptr<Slot>> backends_;
  std::map<std::string, RoleBinding> roles_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, json> memory_;
  std::unordered_map<std::string, std::shared_future<json>> in_flight_;
  std::vector<std::string> warnings_;
  std::function<void(const std::string&)> sink_;

  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace esvr
