#pragma once

// Uniform chat interface over multimodal model backends.
//
// A Provider wraps one backend (OpenAI-compatible HTTP, Gemini-style HTTP or
// the scripted test double) with retry/backoff, a per-provider rate limiter
// and an optional content-addressed response cache.

#include "unac/domain.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace unac::provider {

enum class Dialect { kOpenAiCompat, kGeminiStyle, kScripted };

std::string_view to_string(Dialect d);
std::optional<Dialect> parse_dialect(std::string_view s);

struct ProviderConfig {
  std::string provider_id;
  Dialect dialect = Dialect::kScripted;
  // Base URL for the HTTP dialects; fixture file path for the scripted one.
  std::string endpoint;
  std::string model_name;
  // Name of the environment variable holding the API key. Empty means no auth.
  std::string api_key_env;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int request_timeout_ms = 60000;
  int max_retries = 3;
  // Backoff between retries: base * factor^(attempt-1), +/- jitter, capped.
  int backoff_base_ms = 1000;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;
  int backoff_cap_ms = 30000;
  // 0 disables rate limiting.
  int requests_per_minute = 0;
  // Gemini-style only: send the key as ?key= instead of the x-goog-api-key header.
  bool api_key_in_query = false;
};

/// Throws ProviderError(kConfig) naming the first invalid field.
void validate(const ProviderConfig& config);

/// Which provider serves each pipeline role. `analyze` falls back to
/// `abstract`; decomposition and sub-question answering run under `check`.
struct StageRoles {
  std::optional<std::string> analyze;
  std::string abstract;
  std::string check;
  std::string conclude;
  std::optional<std::string> judge;
};

enum class Role { kSystem, kUser, kAssistant };
std::string_view to_string(Role r);

struct ContentPart {
  enum class Kind { kText, kImage };
  Kind kind = Kind::kText;
  std::string text;
  ImageBlob image;

  static ContentPart text_part(std::string t) { return {Kind::kText, std::move(t), {}}; }
  static ContentPart image_part(ImageBlob img) { return {Kind::kImage, {}, std::move(img)}; }
};

struct ChatMessage {
  Role role = Role::kUser;
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  // Unset values fall back to the provider config.
  std::optional<double> temperature;
  std::optional<int> max_output_tokens;

  static ChatRequest user(std::string text, std::vector<ImageBlob> images = {});
  /// All text parts as "[role]\ntext" blocks, in order.
  std::string prompt_text() const;
  /// Content hashes of every image part, in order.
  std::vector<std::string> image_digests() const;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int total_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason;
  std::optional<TokenUsage> usage;
  bool cached = false;
};

/// One physical attempt of a chat call, successful or not.
struct Attempt {
  int number = 1;
  int http_status = 0;  // 0 when no HTTP response arrived
  std::string error;
  std::int64_t wall_time_ms = 0;
};

enum class ErrorKind {
  kPrecondition,
  kConfig,
  kUnknownProvider,
  kAuth,
  kRateLimitedExhausted,
  kTimeoutExhausted,
  kServerErrorExhausted,
  kMalformedResponse,
  kRequestRejected,
};

std::string_view to_string(ErrorKind k);

class ProviderError : public std::runtime_error {
 public:
  ProviderError(ErrorKind kind, const std::string& message);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// A failed attempt the retry loop may repeat.
class TransientError : public std::runtime_error {
 public:
  enum class Cause { kRateLimited, kServerError, kTimeout };
  TransientError(Cause cause, int http_status, const std::string& message)
      : std::runtime_error(message), cause_(cause), http_status_(http_status) {}
  Cause cause() const { return cause_; }
  int http_status() const { return http_status_; }

 private:
  Cause cause_;
  int http_status_;
};

/// Performs exactly one attempt. Throws TransientError for retryable failures
/// and ProviderError for everything else.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse send(const ChatRequest& request, const ProviderConfig& config) = 0;
};

/// Digest of (provider id, whitespace-normalized prompt text, image hashes).
/// Keys scripted fixtures and the on-disk response cache.
std::string request_digest(std::string_view provider_id, const ChatRequest& request);

/// Content-addressed response store: <root>/<provider>/<model>/<digest>.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  std::optional<ChatResponse> get(const ProviderConfig& config, const std::string& digest);
  void put(const ProviderConfig& config, const std::string& digest, const ChatResponse& response);

  std::size_t hits() const;
  std::size_t misses() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path path_for(const ProviderConfig& config, const std::string& digest) const;

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Spaces requests evenly at the configured rate; safe for concurrent callers.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute);
  void acquire();

 private:
  std::chrono::steady_clock::duration interval_{};
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_free_{};
};

/// Delay before retry number `retry` (1-based), jitter drawn from `rng`.
std::chrono::milliseconds backoff_delay(const ProviderConfig& config, int retry, std::mt19937& rng);

class Provider {
 public:
  Provider(ProviderConfig config, std::shared_ptr<ChatBackend> backend,
           std::shared_ptr<ResponseCache> cache = nullptr);

  /// Sends the request, retrying transient failures up to max_retries times.
  /// Every physical attempt is appended to `attempts` when given, including
  /// on failure. Cache hits produce one attempt with zero wall time.
  ChatResponse chat(const ChatRequest& request, std::vector<Attempt>* attempts = nullptr);

  const ProviderConfig& config() const { return config_; }
  const std::string& id() const { return config_.provider_id; }
  ChatBackend& backend() { return *backend_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  RateLimiter limiter_;
  std::mutex rng_mu_;
  std::mt19937 rng_;
};

/// Builds the backend for a config's dialect. HTTP dialects read their API key
/// from the environment here; a missing key is an auth error.
std::shared_ptr<ChatBackend> make_backend(const ProviderConfig& config);

/// The configured providers, by id.
class ProviderSet {
 public:
  void add(std::shared_ptr<Provider> provider);
  Provider& get(const std::string& id) const;
  bool contains(const std::string& id) const { return providers_.count(id) != 0; }
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<Provider>> providers_;
};

/// Throws ProviderError(kUnknownProvider) when a role names a missing provider.
void validate_roles(const StageRoles& roles, const ProviderSet& providers);

/// The provider id serving `stage`.
const std::string& stage_provider_id(const StageRoles& roles, Stage stage);

/// The config bound to `stage`; throws kUnknownProvider when unbound.
const ProviderConfig& resolve_stage_provider(const StageRoles& roles, const ProviderSet& providers, Stage stage);

}  // namespace unac::provider
