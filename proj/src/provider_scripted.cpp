#include "unac/provider_scripted.hpp"

#include "unac/domain_io.hpp"
#include "unac/provider_http.hpp"

#include <cstdlib>

namespace unac::provider {

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& fixture) {
  auto backend = std::make_shared<ScriptedBackend>();
  std::vector<nlohmann::json> records;
  try {
    records = read_jsonl(fixture);
  } catch (const std::exception& e) {
    throw ProviderError(ErrorKind::kConfig, std::string("scripted fixture: ") + e.what());
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto where = fixture.string() + " record " + std::to_string(i + 1);
    try {
      if (r.contains("default")) {
        backend->set_default(r["default"].get<std::string>());
      } else if (r.contains("key")) {
        backend->add_keyed(r["key"].get<std::string>(), r.at("response").get<std::string>());
      } else if (r.contains("contains")) {
        auto needles = r["contains"].is_string() ? std::vector<std::string>{r["contains"].get<std::string>()}
                                                 : r["contains"].get<std::vector<std::string>>();
        if (r.contains("fail_status")) {
          backend->add_failure(std::move(needles), r["fail_status"].get<int>());
        } else {
          backend->add_rule(std::move(needles), r.at("response").get<std::string>());
        }
      } else {
        throw ProviderError(ErrorKind::kConfig, where + ": needs one of key, contains, default");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(ErrorKind::kConfig, where + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::add_keyed(std::string digest, std::string response) {
  std::lock_guard lock(mu_);
  keyed_[std::move(digest)] = std::move(response);
}

void ScriptedBackend::add_rule(std::vector<std::string> contains, std::string response) {
  std::lock_guard lock(mu_);
  rules_.push_back(Rule{std::move(contains), std::move(response), 0});
}

void ScriptedBackend::add_failure(std::vector<std::string> contains, int http_status) {
  std::lock_guard lock(mu_);
  rules_.push_back(Rule{std::move(contains), {}, http_status});
}

void ScriptedBackend::set_default(std::string response) {
  std::lock_guard lock(mu_);
  default_ = std::move(response);
}

ChatResponse ScriptedBackend::send(const ChatRequest& request, const ProviderConfig& config) {
  const auto prompt = request.prompt_text();
  const auto digest = request_digest(config.provider_id, request);
  std::lock_guard lock(mu_);
  prompts_.push_back(prompt);
  auto respond = [](const std::string& text) { return ChatResponse{text, "stop", std::nullopt, false}; };
  if (auto it = keyed_.find(digest); it != keyed_.end()) return respond(it->second);
  for (const auto& rule : rules_) {
    const bool match = std::all_of(rule.contains.begin(), rule.contains.end(),
                                   [&](const std::string& n) { return prompt.find(n) != std::string::npos; });
    if (!match) continue;
    if (rule.fail_status == 0) return respond(rule.response);
    const int s = rule.fail_status;
    const auto msg = "scripted failure HTTP " + std::to_string(s);
    if (s == 401 || s == 403) throw ProviderError(ErrorKind::kAuth, msg);
    if (s == 429) throw TransientError(TransientError::Cause::kRateLimited, s, msg);
    if (s == 408 || s == 504) throw TransientError(TransientError::Cause::kTimeout, s, msg);
    if (s >= 500) throw TransientError(TransientError::Cause::kServerError, s, msg);
    throw ProviderError(ErrorKind::kRequestRejected, msg);
  }
  if (default_) return respond(*default_);
  throw ProviderError(ErrorKind::kMalformedResponse,
                      "no scripted response for provider '" + config.provider_id + "' digest " + digest);
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return prompts_.size();
}

std::vector<std::string> ScriptedBackend::prompts() const {
  std::lock_guard lock(mu_);
  return prompts_;
}

void ScriptedBackend::clear_log() {
  std::lock_guard lock(mu_);
  prompts_.clear();
}

std::shared_ptr<ChatBackend> make_backend(const ProviderConfig& config) {
  validate(config);
  if (config.dialect == Dialect::kScripted) return ScriptedBackend::load(config.endpoint);
  std::string key;
  if (!config.api_key_env.empty()) {
    const char* value = std::getenv(config.api_key_env.c_str());
    if (!value || !*value) {
      throw ProviderError(ErrorKind::kAuth, "provider '" + config.provider_id + "' needs environment variable " +
                                                config.api_key_env + " to hold its API key");
    }
    key = value;
  }
  if (config.dialect == Dialect::kOpenAiCompat) return std::make_shared<OpenAiCompatBackend>(key);
  return std::make_shared<GeminiBackend>(key);
}

}  // namespace unac::provider
