#pragma once

// Concrete backends: the HTTP client, a scripted test double and the
// deterministic synthetic backend used by the mock profile.

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "esvr/gateway.hpp"

namespace esvr {

// Generators speak the chat-completions JSON shape at {base_url}/chat/completions.
// Classifiers are single-endpoint services:
//   POST {base_url}/sentiment  {"text": s} -> {"score": x}
//   POST {base_url}/values     {"text": s} -> {"probabilities": [20 numbers]}
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);
  json call(const BackendRequest& req) override;

 private:
  BackendConfig cfg_;
  std::string origin_;  // scheme://host[:port]
  std::string prefix_;  // path prefix without trailing slash
};

// Answers every request with `handler`. Thread-safe; counts calls and can
// hold each call open for `delay_ms` to exercise the concurrency limiter.
class ScriptedBackend : public Backend {
 public:
  using Handler = std::function<json(const BackendRequest&)>;
  explicit ScriptedBackend(Handler handler, int delay_ms = 0);

  json call(const BackendRequest& req) override;
  std::size_t calls() const noexcept { return calls_.load(); }
  std::size_t peak_concurrency() const noexcept { return peak_.load(); }

  // Chat replies cycled by sample_index, e.g. {"A", "B"} gives A, B, A, ...
  static Handler cycle(std::vector<std::string> texts);
  // Chat reply chosen by a function of the last user message.
  static Handler chat(std::function<std::string(const json& payload)> fn);
  static Handler constant_sentiment(double score);
  static Handler constant_values(std::vector<double> probs);

 private:
  Handler handler_;
  int delay_ms_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> active_{0};
  std::atomic<std::size_t> peak_{0};
};

// Deterministic heuristic stand-in for every role, keyed on the prompt
// markers emitted by prompts.hpp. Outputs depend only on the request.
class SyntheticBackend : public Backend {
 public:
  json call(const BackendRequest& req) override;

  // Lexicon-based scorers, exposed for tests.
  static double sentiment(const std::string& text);
  static std::vector<double> values(const std::string& text);
};

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace esvr
