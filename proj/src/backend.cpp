#include "ger/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "ger/align.hpp"
#include "ger/digest.hpp"
#include "ger/error.hpp"

namespace ger {

using nlohmann::json;

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::http_chat: return "http_chat";
    case BackendKind::mock_echo: return "mock_echo";
    case BackendKind::mock_oracle: return "mock_oracle";
    case BackendKind::identity: return "identity";
  }
  return "?";
}

BackendKind parse_backend_kind(const std::string& s) {
  if (s == "http_chat") return BackendKind::http_chat;
  if (s == "mock_echo") return BackendKind::mock_echo;
  if (s == "mock_oracle") return BackendKind::mock_oracle;
  if (s == "identity") return BackendKind::identity;
  throw ConfigError("unknown backend kind '" + s + "'");
}

void validate(const BackendConfig& cfg) {
  if (!(cfg.temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (cfg.max_retries < 0 || cfg.max_retries > 20) throw ConfigError("max_retries must be in 0..20");
  if (!(cfg.requests_per_minute >= 0.0)) throw ConfigError("requests_per_minute must be >= 0");
  if (cfg.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (cfg.kind == BackendKind::http_chat && cfg.endpoint.empty())
    throw ConfigError("http_chat backend needs an endpoint");
}

std::string EchoBackend::complete(const CompletionRequest& req) {
  if (req.mode == CorrectionMode::selection) return "1";
  if (!req.nbest || req.nbest->hypotheses.empty())
    throw BackendError("mock_echo: no hypotheses", false);
  return req.nbest->top().text;
}

std::string OracleBackend::complete(const CompletionRequest& req) {
  if (!req.reference) throw BackendError("mock_oracle: no reference for utterance", false);
  if (req.mode == CorrectionMode::generation) return *req.reference;
  if (!req.nbest || req.nbest->hypotheses.empty())
    throw BackendError("mock_oracle: no hypotheses", false);
  return std::to_string(oracle_select(tokenize(*req.reference), *req.nbest).index);
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  const std::string& url = cfg_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpChatBackend::complete(const CompletionRequest& req) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.request_timeout).count();
  client.set_connection_timeout(static_cast<time_t>(secs));
  client.set_read_timeout(static_cast<time_t>(secs));

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const json body{{"model", cfg_.model_name},
                  {"temperature", cfg_.temperature},
                  {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw BackendError("request failed: " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500)
    throw BackendError("HTTP " + std::to_string(res->status), true);
  if (res->status != 200)
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected response body: ") + e.what(), false);
  }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::http_chat: return std::make_unique<HttpChatBackend>(cfg);
    case BackendKind::mock_echo: return std::make_unique<EchoBackend>();
    case BackendKind::mock_oracle: return std::make_unique<OracleBackend>();
    case BackendKind::identity: return nullptr;
  }
  return nullptr;
}

RateLimiter::RateLimiter(double requests_per_minute, std::function<void(Clock::duration)> sleep,
                         std::function<Clock::time_point()> now)
    : sleep_(std::move(sleep)), now_(std::move(now)) {
  if (requests_per_minute > 0.0)
    interval_ = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(60.0 / requests_per_minute));
  if (!sleep_) sleep_ = [](Clock::duration d) { std::this_thread::sleep_for(d); };
  if (!now_) now_ = [] { return Clock::now(); };
}

void RateLimiter::acquire() {
  if (interval_ == Clock::duration::zero()) return;
  Clock::duration wait{};
  {
    std::lock_guard lock(mu_);
    const auto now = now_();
    const auto slot = next_ && *next_ > now ? *next_ : now;
    wait = slot - now;
    next_ = slot + interval_;
  }
  if (wait > Clock::duration::zero()) sleep_(wait);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const std::string& model, double temperature,
                               const std::string& prompt) {
  return sha256_hex(json::array({model, temperature, prompt}).dump());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(dir_ / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    json j = json::parse(in);
    return j.at("response").get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;  // partial or foreign file: refetch
  }
}

void ResponseCache::put(const std::string& key, const std::string& model, double temperature,
                        const std::string& response) const {
  if (dir_.empty()) return;
  const json j{{"model", model}, {"temperature", temperature}, {"response", response}};
  write_file_atomic(dir_ / (key + ".json"), j.dump() + "\n");
}

}  // namespace ger
