#include "unac/provider.hpp"

#include "unac/codec.hpp"
#include "unac/domain_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>

namespace unac::provider {
namespace {

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - since).count();
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string sanitize_path_component(std::string_view s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  }
  return out.empty() ? "_" : out;
}

}  // namespace

std::string_view to_string(Dialect d) {
  switch (d) {
    case Dialect::kOpenAiCompat: return "openai_compat";
    case Dialect::kGeminiStyle: return "gemini_style";
    case Dialect::kScripted: return "scripted";
  }
  return "?";
}

std::optional<Dialect> parse_dialect(std::string_view s) {
  if (s == "openai_compat") return Dialect::kOpenAiCompat;
  if (s == "gemini_style") return Dialect::kGeminiStyle;
  if (s == "scripted") return Dialect::kScripted;
  return std::nullopt;
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "?";
}

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kUnknownProvider: return "unknown_provider_id";
    case ErrorKind::kAuth: return "auth_error";
    case ErrorKind::kRateLimitedExhausted: return "rate_limited_exhausted";
    case ErrorKind::kTimeoutExhausted: return "timeout_exhausted";
    case ErrorKind::kServerErrorExhausted: return "server_error_exhausted";
    case ErrorKind::kMalformedResponse: return "malformed_response";
    case ErrorKind::kRequestRejected: return "request_rejected";
  }
  return "?";
}

ProviderError::ProviderError(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void validate(const ProviderConfig& c) {
  auto fail = [&](const std::string& what) {
    throw ProviderError(ErrorKind::kConfig, "provider '" + c.provider_id + "': " + what);
  };
  if (c.provider_id.empty()) fail("provider_id is empty");
  if (c.dialect != Dialect::kScripted && c.endpoint.empty()) fail("endpoint is empty");
  if (c.dialect != Dialect::kScripted && c.model_name.empty()) fail("model is empty");
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) fail("temperature must be in [0, 2]");
  if (c.max_output_tokens < 1) fail("max_output_tokens must be >= 1");
  if (c.request_timeout_ms < 1) fail("request_timeout_ms must be >= 1");
  if (c.max_retries < 0) fail("max_retries must be >= 0");
  if (c.backoff_base_ms < 0 || c.backoff_cap_ms < 0) fail("backoff delays must be >= 0");
  if (c.backoff_factor < 1.0) fail("backoff_factor must be >= 1");
  if (!(c.backoff_jitter >= 0.0 && c.backoff_jitter < 1.0)) fail("backoff_jitter must be in [0, 1)");
  if (c.requests_per_minute < 0) fail("requests_per_minute must be >= 0");
}

ChatRequest ChatRequest::user(std::string text, std::vector<ImageBlob> images) {
  ChatMessage msg;
  msg.role = Role::kUser;
  for (auto& img : images) msg.parts.push_back(ContentPart::image_part(std::move(img)));
  msg.parts.push_back(ContentPart::text_part(std::move(text)));
  ChatRequest req;
  req.messages.push_back(std::move(msg));
  return req;
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n";
    out += "[";
    out += to_string(m.role);
    out += "]\n";
    bool first = true;
    for (const auto& p : m.parts) {
      if (p.kind != ContentPart::Kind::kText) continue;
      if (!first) out += "\n";
      out += p.text;
      first = false;
    }
  }
  return out;
}

std::vector<std::string> ChatRequest::image_digests() const {
  std::vector<std::string> out;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::kImage) out.push_back(p.image.digest());
    }
  }
  return out;
}

std::string request_digest(std::string_view provider_id, const ChatRequest& request) {
  std::string material(provider_id);
  material += '\x1f';
  material += collapse_whitespace(request.prompt_text());
  for (const auto& d : request.image_digests()) {
    material += '\x1f';
    material += d;
  }
  return sha256_hex(material);
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path ResponseCache::path_for(const ProviderConfig& config, const std::string& digest) const {
  return root_ / sanitize_path_component(config.provider_id) / sanitize_path_component(config.model_name) /
         (digest + ".json");
}

std::optional<ChatResponse> ResponseCache::get(const ProviderConfig& config, const std::string& digest) {
  const auto path = path_for(config, digest);
  std::lock_guard lock(mu_);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    ++misses_;
    return std::nullopt;
  }
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    r.finish_reason = j.value("finish_reason", std::string{});
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      r.usage = TokenUsage{u.value("prompt_tokens", 0), u.value("completion_tokens", 0), u.value("total_tokens", 0)};
    }
    r.cached = true;
    ++hits_;
    return r;
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
    ++misses_;
    return std::nullopt;
  }
}

void ResponseCache::put(const ProviderConfig& config, const std::string& digest, const ChatResponse& response) {
  const auto path = path_for(config, digest);
  nlohmann::json j{{"text", response.text}, {"finish_reason", response.finish_reason}};
  if (response.usage) {
    j["usage"] = {{"prompt_tokens", response.usage->prompt_tokens},
                  {"completion_tokens", response.usage->completion_tokens},
                  {"total_tokens", response.usage->total_tokens}};
  }
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, j.dump());
}

std::size_t ResponseCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t ResponseCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

RateLimiter::RateLimiter(int requests_per_minute) {
  if (requests_per_minute > 0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::minutes(1)) /
                requests_per_minute;
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    slot = std::max(std::chrono::steady_clock::now(), next_free_);
    next_free_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::chrono::milliseconds backoff_delay(const ProviderConfig& config, int retry, std::mt19937& rng) {
  double base = config.backoff_base_ms * std::pow(config.backoff_factor, std::max(0, retry - 1));
  base = std::min(base, static_cast<double>(config.backoff_cap_ms));
  std::uniform_real_distribution<double> jitter(1.0 - config.backoff_jitter, 1.0 + config.backoff_jitter);
  const double ms = std::min(base * jitter(rng), static_cast<double>(config.backoff_cap_ms));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(ms)));
}

Provider::Provider(ProviderConfig config, std::shared_ptr<ChatBackend> backend, std::shared_ptr<ResponseCache> cache)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      limiter_(config_.requests_per_minute),
      rng_(std::random_device{}()) {
  validate(config_);
  if (!backend_) throw ProviderError(ErrorKind::kConfig, "provider '" + config_.provider_id + "' has no backend");
}

ChatResponse Provider::chat(const ChatRequest& request, std::vector<Attempt>* attempts) {
  if (request.messages.empty()) {
    throw ProviderError(ErrorKind::kPrecondition, "chat request has no messages");
  }
  const auto systems = std::count_if(request.messages.begin(), request.messages.end(),
                                     [](const ChatMessage& m) { return m.role == Role::kSystem; });
  if (systems > 1) throw ProviderError(ErrorKind::kPrecondition, "chat request has more than one system message");

  std::string digest;
  if (cache_) {
    digest = request_digest(config_.provider_id, request);
    if (auto hit = cache_->get(config_, digest)) {
      if (attempts) attempts->push_back(Attempt{1, 0, {}, 0});
      return *hit;
    }
  }

  const int max_attempts = config_.max_retries + 1;
  for (int attempt = 1;; ++attempt) {
    limiter_.acquire();
    const auto start = std::chrono::steady_clock::now();
    try {
      ChatResponse response = backend_->send(request, config_);
      if (attempts) attempts->push_back(Attempt{attempt, 200, {}, elapsed_ms(start)});
      if (cache_) cache_->put(config_, digest, response);
      return response;
    } catch (const TransientError& e) {
      if (attempts) attempts->push_back(Attempt{attempt, e.http_status(), e.what(), elapsed_ms(start)});
      if (attempt >= max_attempts) {
        const auto kind = e.cause() == TransientError::Cause::kRateLimited ? ErrorKind::kRateLimitedExhausted
                          : e.cause() == TransientError::Cause::kTimeout   ? ErrorKind::kTimeoutExhausted
                                                                           : ErrorKind::kServerErrorExhausted;
        throw ProviderError(kind, "provider '" + config_.provider_id + "' gave up after " +
                                      std::to_string(attempt) + " attempts: " + e.what());
      }
      std::chrono::milliseconds delay;
      {
        std::lock_guard lock(rng_mu_);
        delay = backoff_delay(config_, attempt, rng_);
      }
      spdlog::debug("provider {} attempt {} failed ({}); retrying in {} ms", config_.provider_id, attempt, e.what(),
                    delay.count());
      std::this_thread::sleep_for(delay);
    } catch (const ProviderError& e) {
      if (attempts) attempts->push_back(Attempt{attempt, 0, e.what(), elapsed_ms(start)});
      throw;
    }
  }
}

void ProviderSet::add(std::shared_ptr<Provider> provider) {
  const auto id = provider->id();
  if (!providers_.emplace(id, std::move(provider)).second) {
    throw ProviderError(ErrorKind::kConfig, "duplicate provider id '" + id + "'");
  }
}

Provider& ProviderSet::get(const std::string& id) const {
  auto it = providers_.find(id);
  if (it == providers_.end()) throw ProviderError(ErrorKind::kUnknownProvider, "no provider with id '" + id + "'");
  return *it->second;
}

std::vector<std::string> ProviderSet::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : providers_) out.push_back(id);
  return out;
}

void validate_roles(const StageRoles& roles, const ProviderSet& providers) {
  auto check = [&](const char* role, const std::string& id) {
    if (id.empty()) throw ProviderError(ErrorKind::kUnknownProvider, std::string("role '") + role + "' is not bound");
    if (!providers.contains(id)) {
      throw ProviderError(ErrorKind::kUnknownProvider,
                          std::string("role '") + role + "' references undefined provider '" + id + "'");
    }
  };
  if (roles.analyze) check("analyze", *roles.analyze);
  check("abstract", roles.abstract);
  check("check", roles.check);
  check("conclude", roles.conclude);
  if (roles.judge) check("judge", *roles.judge);
}

const std::string& stage_provider_id(const StageRoles& roles, Stage stage) {
  switch (stage) {
    case Stage::kAnalyze: return roles.analyze ? *roles.analyze : roles.abstract;
    case Stage::kAbstractGlobal:
    case Stage::kAbstractLocal: return roles.abstract;
    case Stage::kDecompose:
    case Stage::kAnswer:
    case Stage::kCheck: return roles.check;
    case Stage::kConclude: return roles.conclude;
    case Stage::kJudge:
      if (!roles.judge) throw ProviderError(ErrorKind::kUnknownProvider, "no judge provider configured");
      return *roles.judge;
  }
  throw ProviderError(ErrorKind::kPrecondition, "unknown stage");
}

const ProviderConfig& resolve_stage_provider(const StageRoles& roles, const ProviderSet& providers, Stage stage) {
  return providers.get(stage_provider_id(roles, stage)).config();
}

}  // namespace unac::provider
