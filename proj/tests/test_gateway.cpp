#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "esvr/backends.hpp"
#include "esvr/error.hpp"
#include "esvr/gateway.hpp"
#include "support.hpp"

using namespace esvr;

namespace {

std::vector<ChatMessage> msgs(const std::string& text) { return {{"system", "s"}, {"user", text}}; }

}  // namespace

TEST_CASE("identical requests are served from cache; sample index splits the key") {
  Gateway gw;
  auto b = test::bind_all(gw, ScriptedBackend::chat([](const json& p) { return "echo " + test::last_content(p); }));
  CHECK(gw.chat("rg", msgs("a")) == "echo a");
  CHECK(gw.chat("rg", msgs("a")) == "echo a");
  CHECK(b->calls() == 1);
  CHECK(gw.stats().cache_hits == 1);
  gw.chat("rg", msgs("a"), 1);
  CHECK(b->calls() == 2);
  auto k1 = cache_key("x#openai", "m", "chat", json{{"a", 1}}, 0);
  CHECK(k1 != cache_key("x#openai", "m", "chat", json{{"a", 1}}, 1));
  CHECK(k1 != cache_key("x#openai", "m2", "chat", json{{"a", 1}}, 0));
  CHECK(k1 == cache_key("x#openai", "m", "chat", json{{"a", 1}}, 0));
}

TEST_CASE("the disk cache survives a new gateway") {
  test::TempDir dir;
  std::size_t first_calls = 0;
  {
    Gateway gw(Gateway::Options{dir.path(), false});
    auto b = test::bind_all(gw, ScriptedBackend::cycle({"hello"}));
    CHECK(gw.chat("judge", msgs("q")) == "hello");
    first_calls = b->calls();
  }
  Gateway gw(Gateway::Options{dir.path(), false});
  auto b = test::bind_all(gw, ScriptedBackend::cycle({"different"}));
  CHECK(gw.chat("judge", msgs("q")) == "hello");
  CHECK(first_calls == 1);
  CHECK(b->calls() == 0);
  CHECK(gw.stats().cache_hits == 1);
}

TEST_CASE("transient failures are retried up to the attempt limit") {
  Gateway gw(Gateway::Options{std::nullopt, false});
  std::atomic<int> n{0};
  auto flaky = std::make_shared<ScriptedBackend>([&](const BackendRequest&) -> json {
    if (n.fetch_add(1) < 2) throw BackendError("test", 503, "busy");
    return json{{"text", "ok"}};
  });
  BackendConfig cfg;
  cfg.name = "flaky";
  cfg.kind = "scripted";
  cfg.max_retries = 3;
  gw.add_backend(cfg, flaky);
  gw.bind_role("rg", RoleBinding{"flaky", "", 0.7, 64});
  CHECK(gw.chat("rg", msgs("x")) == "ok");
  CHECK(flaky->calls() == 3);

  auto down = std::make_shared<ScriptedBackend>([](const BackendRequest&) -> json {
    throw BackendUnavailable("test", "connection refused");
  });
  cfg.name = "down";
  gw.add_backend(cfg, down);
  gw.bind_role("judge", RoleBinding{"down", "", 1.0, 64});
  CHECK_THROWS_AS(gw.chat("judge", msgs("x")), BackendUnavailable);
  CHECK(down->calls() == 3);

  auto bad = std::make_shared<ScriptedBackend>([](const BackendRequest&) -> json { throw BackendError("test", 400, "no"); });
  cfg.name = "bad";
  gw.add_backend(cfg, bad);
  gw.bind_role("tvd", RoleBinding{"bad", "", 0.7, 64});
  CHECK_THROWS_AS(gw.chat("tvd", msgs("x")), BackendError);
  CHECK(bad->calls() == 1);
}

TEST_CASE("in-flight requests per backend never exceed the limit") {
  Gateway gw;
  auto b = std::make_shared<ScriptedBackend>(ScriptedBackend::chat([](const json& p) { return test::last_content(p); }), 20);
  BackendConfig cfg;
  cfg.name = "slow";
  cfg.kind = "scripted";
  cfg.max_concurrency = 2;
  gw.add_backend(cfg, b);
  gw.bind_role("rg", RoleBinding{"slow", "", 0.7, 64});
  util::parallel_for(12, 6, [&](std::size_t i) { gw.chat("rg", msgs(std::to_string(i))); });
  CHECK(b->calls() == 12);
  CHECK(b->peak_concurrency() <= 2);
  CHECK(gw.peak_in_flight("slow") <= 2);
  CHECK(gw.peak_in_flight("slow") >= 1);
}

TEST_CASE("concurrent identical requests reach the backend once") {
  Gateway gw;
  auto b = std::make_shared<ScriptedBackend>(ScriptedBackend::cycle({"same"}), 30);
  BackendConfig cfg;
  cfg.name = "slow";
  cfg.kind = "scripted";
  gw.add_backend(cfg, b);
  gw.bind_role("rg", RoleBinding{"slow", "", 0.7, 64});
  util::parallel_for(8, 8, [&](std::size_t) { CHECK(gw.chat("rg", msgs("q")) == "same"); });
  CHECK(b->calls() == 1);
}

TEST_CASE("judge_n draws distinct sample indices") {
  Gateway gw;
  test::bind_all(gw, ScriptedBackend::cycle({"a", "b", "c"}));
  CHECK(gw.chat_n("judge", msgs("q"), 4) == std::vector<std::string>{"a", "b", "c", "a"});
  CHECK_THROWS_AS(gw.chat_n("judge", msgs("q"), 0), InvalidArgument);
}

TEST_CASE("classifier outputs are clamped with a warning; wrong shapes are schema errors") {
  Gateway gw;
  std::vector<std::string> sink;
  gw.set_warning_sink([&](const std::string& m) { sink.push_back(m); });
  BackendConfig cfg;
  cfg.kind = "scripted";
  cfg.name = "sent";
  gw.add_backend(cfg, std::make_shared<ScriptedBackend>(ScriptedBackend::constant_sentiment(1.3)));
  cfg.name = "vals";
  std::vector<double> v(20, 0.2);
  v[0] = -0.1;
  gw.add_backend(cfg, std::make_shared<ScriptedBackend>(ScriptedBackend::constant_values(v)));
  cfg.name = "short";
  gw.add_backend(cfg, std::make_shared<ScriptedBackend>(ScriptedBackend::constant_values(std::vector<double>(19, 0.2))));
  CHECK(gw.score_sentiment("sent", "x") == 1.0);
  CHECK(gw.detect_values("vals", "x")[ValueId::SelfDirectionThought] == 0.0);
  CHECK(sink.size() == 2);
  CHECK(gw.warnings().size() == 2);
  CHECK_THROWS_AS(gw.detect_values("short", "x"), SchemaError);
}

TEST_CASE("request validation") {
  ChatRequest r;
  r.backend = "b";
  CHECK_THROWS_AS(validate(r), InvalidArgument);
  r.messages = {{"wizard", "x"}};
  CHECK_THROWS_AS(validate(r), InvalidArgument);
  r.messages = {{"user", "x"}};
  r.temperature = -1;
  CHECK_THROWS_AS(validate(r), InvalidArgument);
  r.temperature = 0.5;
  CHECK_NOTHROW(validate(r));
  Gateway gw;
  CHECK_THROWS_AS(gw.chat("nobody", msgs("x")), Error);
}

TEST_CASE("HTTP backend speaks the chat-completions and classifier wire formats") {
  httplib::Server server;
  std::atomic<int> failures_left{1};
  std::string seen_auth;
  std::mutex mu;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left.fetch_sub(1) > 0) {
      res.status = 500;
      res.set_content("boom", "text/plain");
      return;
    }
    {
      std::lock_guard lk(mu);
      seen_auth = req.get_header_value("Authorization");
    }
    auto body = json::parse(req.body);
    json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "model=" + body["model"].get<std::string>()}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/v1/sentiment", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"score": 0.25})", "application/json");
  });
  server.Post("/v1/values", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"probabilities", std::vector<double>(20, 0.5)}}.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("ESVR_TEST_TOKEN", "secret", 1);
  BackendConfig cfg;
  cfg.name = "live";
  cfg.kind = "openai";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
  cfg.model = "tiny";
  cfg.auth_env = "ESVR_TEST_TOKEN";
  cfg.backoff_ms = 1;
  Gateway gw(Gateway::Options{std::nullopt, false});
  gw.add_backend(cfg, make_backend(cfg));
  gw.bind_role("rg", RoleBinding{"live", "", 0.7, 64});
  CHECK(gw.chat("rg", msgs("hi")) == "model=tiny");
  CHECK(seen_auth == "Bearer secret");
  CHECK(gw.stats().backend_calls == 2);
  CHECK(gw.score_sentiment("live", "x") == doctest::Approx(0.25));
  CHECK(gw.detect_values("live", "x")[ValueId::Face] == doctest::Approx(0.5));
  server.stop();
  th.join();

  BackendConfig dead = cfg;
  dead.name = "dead";
  dead.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  dead.timeout_s = 0.5;
  dead.max_retries = 2;
  gw.add_backend(dead, make_backend(dead));
  CHECK_THROWS_AS(gw.score_sentiment("dead", "y"), BackendUnavailable);

  BackendConfig weird = cfg;
  weird.kind = "carrier-pigeon";
  CHECK_THROWS_AS(make_backend(weird), ConfigError);
}
