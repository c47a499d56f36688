#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "ger/data_model.hpp"

namespace ger {

enum class BackendKind { http_chat, mock_echo, mock_oracle, identity };

std::string to_string(BackendKind k);
BackendKind parse_backend_kind(const std::string& s);

struct BackendConfig {
  BackendKind kind = BackendKind::mock_echo;
  std::string endpoint;  // http_chat only, e.g. http://localhost:8080/v1/chat/completions
  std::string model_name = "mock";
  double temperature = 0.0;
  int max_retries = 3;
  double requests_per_minute = 0.0;  // 0 = uncapped
  int max_in_flight = 4;
  std::string cache_dir;             // empty disables the cache
  bool offline = false;              // cache misses fail instead of calling out
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds request_timeout{60000};
  std::string api_key_env = "GER_API_KEY";
};

void validate(const BackendConfig& cfg);

// What a backend sees for one utterance. Mock backends use the N-best list and
// (for mock_oracle) the reference; the http backend only sends the prompt.
struct CompletionRequest {
  std::string prompt;
  CorrectionMode mode = CorrectionMode::generation;
  const NBestList* nbest = nullptr;
  const std::string* reference = nullptr;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws BackendError; transient() marks failures worth retrying.
  virtual std::string complete(const CompletionRequest& req) = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

// Returns rank-1 text (generation) or "1" (selection).
class EchoBackend final : public Backend {
 public:
  std::string complete(const CompletionRequest& req) override;
};

// Returns the reference (generation) or the index of the closest hypothesis
// (selection). Test double.
class OracleBackend final : public Backend {
 public:
  std::string complete(const CompletionRequest& req) override;
};

// Chat-completion style POST:
//   {"model", "temperature", "messages": [{"role": "user", "content": prompt}]}
// and reads choices[0].message.content. A bearer token is taken from the
// environment variable named in the config, when set.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);
  std::string complete(const CompletionRequest& req) override;

 private:
  BackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

// Spaces request starts at least 60/rpm seconds apart. Thread-safe.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  explicit RateLimiter(double requests_per_minute,
                       std::function<void(Clock::duration)> sleep = nullptr,
                       std::function<Clock::time_point()> now = nullptr);
  void acquire();

 private:
  Clock::duration interval_{};
  std::optional<Clock::time_point> next_;
  std::function<void(Clock::duration)> sleep_;
  std::function<Clock::time_point()> now_;
  std::mutex mu_;
};

// Content-addressed response store: one JSON file per key under `dir`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& model, double temperature,
           const std::string& response) const;
  bool enabled() const { return !dir_.empty(); }

  static std::string key(const std::string& model, double temperature, const std::string& prompt);

 private:
  std::filesystem::path dir_;
};

}  // namespace ger
