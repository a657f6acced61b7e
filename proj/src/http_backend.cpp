#include <httplib.h>

#include <cstdlib>

#include "esvr/backends.hpp"
#include "esvr/error.hpp"

namespace esvr {

namespace {
constexpr const char* kModule = "model_gateway";

std::string excerpt(const std::string& body) { return body.size() > 200 ? body.substr(0, 200) + "..." : body; }
}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  const std::string& url = cfg_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError(kModule, "backend " + cfg_.name + ": base_url must start with http:// or https://");
  auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

json HttpBackend::call(const BackendRequest& req) {
  httplib::Client client(origin_);
  auto secs = static_cast<time_t>(cfg_.timeout_s);
  auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!cfg_.auth_env.empty()) {
    if (const char* token = std::getenv(cfg_.auth_env.c_str()); token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  std::string path;
  json body;
  if (req.endpoint == "chat") {
    path = prefix_ + "/chat/completions";
    body = req.payload;
  } else if (req.endpoint == "sentiment" || req.endpoint == "values") {
    path = prefix_ + "/" + req.endpoint;
    body = req.payload;
    if (!cfg_.model.empty()) body["model"] = cfg_.model;
  } else {
    throw InvalidArgument(kModule, "unknown endpoint '" + req.endpoint + "'");
  }

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendUnavailable(kModule, cfg_.name + " " + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) throw BackendError(kModule, res->status, excerpt(res->body));

  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded()) throw ParseError(kModule, "backend " + cfg_.name + " returned non-JSON body", excerpt(res->body));

  if (req.endpoint == "chat") {
    try {
      const json& content = reply.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw std::runtime_error("content is not a string");
      return json{{"text", content.get<std::string>()}};
    } catch (const std::exception&) {
      throw SchemaError(kModule, "choices[0].message.content", "missing in reply from " + cfg_.name);
    }
  }
  return reply;
}

}  // namespace esvr
