#pragma once

#include "unac/provider.hpp"

#include <nlohmann/json.hpp>

namespace unac::provider {

/// "http://host:port/base" split into the httplib origin and the base path.
struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash; may be empty
};

/// Throws ProviderError(kConfig) for anything other than http(s) URLs.
ParsedUrl parse_url(std::string_view url);

/// POST {endpoint}/chat/completions with bearer auth and base64 data-URL images.
class OpenAiCompatBackend : public ChatBackend {
 public:
  explicit OpenAiCompatBackend(std::string api_key) : api_key_(std::move(api_key)) {}
  ChatResponse send(const ChatRequest& request, const ProviderConfig& config) override;

  static nlohmann::json build_body(const ChatRequest& request, const ProviderConfig& config);
  static ChatResponse parse_body(const nlohmann::json& body);

 private:
  std::string api_key_;
};

/// POST {endpoint}/models/{model}:generateContent with inline image data.
class GeminiBackend : public ChatBackend {
 public:
  explicit GeminiBackend(std::string api_key) : api_key_(std::move(api_key)) {}
  ChatResponse send(const ChatRequest& request, const ProviderConfig& config) override;

  static nlohmann::json build_body(const ChatRequest& request, const ProviderConfig& config);
  static ChatResponse parse_body(const nlohmann::json& body);

 private:
  std::string api_key_;
};

}  // namespace unac::provider
