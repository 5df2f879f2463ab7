#include "marginsel/chat.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "marginsel/error.hpp"
#include "marginsel/jsonl.hpp"

namespace marginsel {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::pair<std::string, std::string> split_base_url(std::string url) {
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::kConfig, "base_url '" + url + "' must start with http:// or https://");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::kConfig, "unsupported scheme in base_url '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::kIo, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace

void BackendConfig::validate() const {
  if (model_name.empty()) throw Error(Errc::kConfig, "backend model name is empty");
  if (!(temperature >= 0.0)) throw Error(Errc::kConfig, "temperature must be >= 0");
  if (max_retries < 0 || max_retries > kMaxRetriesCap) {
    throw Error(Errc::kConfig, "max_retries must lie in [0, " + std::to_string(kMaxRetriesCap) + "]");
  }
  if (max_tokens <= 0) throw Error(Errc::kConfig, "max_tokens must be positive");
  if (timeout.count() <= 0) throw Error(Errc::kConfig, "timeout must be positive");
  split_base_url(base_url);
}

std::chrono::milliseconds backoff_delay(const BackendConfig& config, int retry) {
  auto delay = config.initial_backoff;
  for (int i = 1; i < retry && delay < config.max_backoff; ++i) delay *= 2;
  return std::min(delay, config.max_backoff);
}

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  std::tie(scheme_host_port_, path_prefix_) = split_base_url(config_.base_url);
}

HttpChatBackend::Response HttpChatBackend::post_with_retries(const std::string& path, const std::string& body,
                                                             int& attempts) {
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(Errc::kAuthMissing, "environment variable " + config_.api_key_env + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  std::optional<Error> last_error;
  attempts = 0;
  for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
    attempts = attempt;
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);

    const auto started = Clock::now();
    auto result = client.Post(path_prefix_ + path, headers, body, "application/json");
    if (!result) {
      const auto elapsed = Clock::now() - started;
      const bool timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                             (result.error() == httplib::Error::Read && elapsed >= config_.timeout * 9 / 10);
      last_error = Error(timed_out ? Errc::kTimeout : Errc::kTransport,
                         "POST " + path + ": " + httplib::to_string(result.error()));
    } else if (result->status >= 500) {
      last_error = Error(Errc::kTransport, "POST " + path + ": HTTP " + std::to_string(result->status));
    } else if (result->status >= 400) {
      throw Error(Errc::kTransport, "POST " + path + ": HTTP " + std::to_string(result->status) +
                                        " (not retried): " + result->body.substr(0, 200));
    } else {
      return Response{result->status, std::move(result->body)};
    }
    if (attempt <= config_.max_retries) {
      const auto delay = backoff_delay(config_, attempt);
      spdlog::debug("{} (attempt {}), retrying in {} ms", last_error->what(), attempt, delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
  throw *last_error;
}

ChatExchange HttpChatBackend::chat(ChatExchange request) {
  json body = {
      {"model", config_.model_name},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.system}}, {{"role", "user"}, {"content", request.user}}})},
  };
  const auto started = Clock::now();
  int attempts = 0;
  Response response = post_with_retries("/chat/completions", body.dump(), attempts);
  request.latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
  request.attempt_count = attempts;

  const json parsed = json::parse(response.body, nullptr, false);
  try {
    request.reply = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(Errc::kTransport, "malformed chat completion response: " + response.body.substr(0, 200));
  }
  return request;
}

std::vector<double> HttpChatBackend::embed(std::string_view text, std::string_view embedding_model) {
  json body = {{"model", std::string(embedding_model)}, {"input", std::string(text)}};
  int attempts = 0;
  Response response = post_with_retries("/embeddings", body.dump(), attempts);
  const json parsed = json::parse(response.body, nullptr, false);
  try {
    return parsed.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw Error(Errc::kTransport, "malformed embedding response: " + response.body.substr(0, 200));
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key_for(std::string_view model, double temperature, std::string_view system,
                                   std::string_view user) {
  const json material = json::array({std::string(model), temperature, std::string(system), std::string(user)});
  return sha256_hex(material.dump());
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const auto path = dir_ / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  const json record = json::parse(jsonl::read_file(path), nullptr, false);
  if (!record.is_object() || !record.contains("reply") || !record["reply"].is_string()) {
    spdlog::warn("ignoring corrupt cache entry {}", path.string());
    return std::nullopt;
  }
  return record["reply"].get<std::string>();
}

void ResponseCache::put(const std::string& key, std::string_view model, double temperature, std::string_view system,
                        std::string_view user, std::string_view reply) {
  nlohmann::ordered_json record;
  record["model"] = model;
  record["temperature"] = temperature;
  record["system"] = system;
  record["user"] = user;
  record["reply"] = reply;
  std::lock_guard lock(write_mutex_);
  jsonl::write_file_atomic(dir_ / (key + ".json"), record.dump(2) + "\n");
}

CachedBackend::CachedBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {
  if (!inner_ || !cache_) throw Error(Errc::kInvalidArgument, "CachedBackend needs a backend and a cache");
}

ChatExchange CachedBackend::chat(ChatExchange request) {
  const std::string model = inner_->model_name();
  const double temp = inner_->temperature();
  const std::string key = ResponseCache::key_for(model, temp, request.system, request.user);
  if (auto reply = cache_->get(key)) {
    ++cache_hits_;
    request.reply = std::move(*reply);
    request.attempt_count = 0;
    request.latency = std::chrono::milliseconds{0};
    return request;
  }
  ++backend_calls_;
  ChatExchange done = inner_->chat(std::move(request));
  cache_->put(key, model, temp, done.system, done.user, done.reply);
  return done;
}

}  // namespace marginsel
