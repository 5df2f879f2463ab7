#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace marginsel {

// One [system, user] request and the model's verbatim reply.
struct ChatExchange {
  std::string system;
  std::string user;
  std::string reply;
  std::chrono::milliseconds latency{0};
  int attempt_count = 0;
};

inline ChatExchange chat_request(std::string system, std::string user) {
  ChatExchange ex;
  ex.system = std::move(system);
  ex.user = std::move(user);
  return ex;
}

struct BackendConfig {
  static constexpr int kMaxRetriesCap = 10;

  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 256;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60'000};
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8'000};
  // Empty means no Authorization header is sent.
  std::string api_key_env;

  // Throws Errc::kConfig.
  void validate() const;
};

// Zero-shot classifier backend. Implementations must be safe to call from
// several threads at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Fills reply, latency and attempt_count.
  virtual ChatExchange chat(ChatExchange request) = 0;
  virtual std::string model_name() const = 0;
  virtual double temperature() const { return 0.0; }
};

// POSTs {model, temperature, max_tokens, messages} to {base_url}/chat/completions
// and reads choices[0].message.content. Connection failures, timeouts and 5xx
// responses are retried with exponential backoff; 4xx responses are not.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);

  ChatExchange chat(ChatExchange request) override;
  std::string model_name() const override { return config_.model_name; }
  double temperature() const override { return config_.temperature; }

  // POST {model, input} to {base_url}/embeddings, returns data[0].embedding.
  std::vector<double> embed(std::string_view text, std::string_view embedding_model);

  const BackendConfig& config() const noexcept { return config_; }

 private:
  struct Response {
    int status = 0;
    std::string body;
  };
  Response post_with_retries(const std::string& path, const std::string& body, int& attempts);

  BackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

// Delay before retry number `retry` (1-based): initial * 2^(retry-1), capped.
std::chrono::milliseconds backoff_delay(const BackendConfig& config, int retry);

// On-disk reply cache, one JSON file per request hash.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  // SHA-256 hex digest of (model, temperature, system, user).
  static std::string key_for(std::string_view model, double temperature, std::string_view system,
                             std::string_view user);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view model, double temperature, std::string_view system,
           std::string_view user, std::string_view reply);

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

// Serves replies from a ResponseCache and forwards misses to `inner`.
class CachedBackend : public ChatBackend {
 public:
  CachedBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache);

  ChatExchange chat(ChatExchange request) override;
  std::string model_name() const override { return inner_->model_name(); }
  double temperature() const override { return inner_->temperature(); }

  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace marginsel
