#include "unac/provider_http.hpp"

#include "unac/codec.hpp"
#include "unac/image.hpp"

#include <httplib.h>

#include <cstdlib>
#include <regex>

namespace unac::provider {
namespace {

using nlohmann::json;

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& url, const ProviderConfig& config) {
  auto cli = std::make_unique<httplib::Client>(url.origin);
  const auto timeout = std::chrono::milliseconds(config.request_timeout_ms);
  cli->set_connection_timeout(timeout);
  cli->set_read_timeout(timeout);
  cli->set_write_timeout(timeout);
  return cli;
}

std::string data_url(const ImageBlob& image) {
  return "data:" + std::string(mime_type(sniff_format(image.bytes()))) + ";base64," + base64_encode(image.bytes());
}

// Maps a transport result onto the retry taxonomy. Returns the parsed body
// for 2xx responses.
json classify(const httplib::Result& res, const std::string& what) {
  if (!res) {
    const auto err = res.error();
    throw TransientError(TransientError::Cause::kTimeout, 0, what + ": " + httplib::to_string(err));
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw ProviderError(ErrorKind::kAuth, what + ": HTTP " + std::to_string(status));
  }
  if (status == 429) throw TransientError(TransientError::Cause::kRateLimited, status, what + ": HTTP 429");
  if (status == 408) throw TransientError(TransientError::Cause::kTimeout, status, what + ": HTTP 408");
  if (status >= 500) {
    throw TransientError(TransientError::Cause::kServerError, status, what + ": HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw ProviderError(ErrorKind::kRequestRejected,
                        what + ": HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
  }
  auto body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw ProviderError(ErrorKind::kMalformedResponse, what + ": body is not JSON");
  return body;
}

std::optional<TokenUsage> usage_from(const json& u, const char* prompt, const char* completion, const char* total) {
  if (!u.is_object()) return std::nullopt;
  TokenUsage t;
  t.prompt_tokens = u.value(prompt, 0);
  t.completion_tokens = u.value(completion, 0);
  t.total_tokens = u.value(total, t.prompt_tokens + t.completion_tokens);
  return t;
}

}  // namespace

ParsedUrl parse_url(std::string_view url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(url.begin(), url.end(), m, kUrl)) {
    throw ProviderError(ErrorKind::kConfig, "not an http(s) URL: " + std::string(url));
  }
  ParsedUrl out{m[1].str(), m[2].matched ? m[2].str() : std::string{}};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

json OpenAiCompatBackend::build_body(const ChatRequest& request, const ProviderConfig& config) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    const bool has_image = std::any_of(m.parts.begin(), m.parts.end(),
                                       [](const ContentPart& p) { return p.kind == ContentPart::Kind::kImage; });
    json msg{{"role", to_string(m.role)}};
    if (!has_image) {
      std::string text;
      for (const auto& p : m.parts) text += p.text;
      msg["content"] = text;
    } else {
      json parts = json::array();
      for (const auto& p : m.parts) {
        if (p.kind == ContentPart::Kind::kText) {
          parts.push_back({{"type", "text"}, {"text", p.text}});
        } else {
          parts.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(p.image)}}}});
        }
      }
      msg["content"] = parts;
    }
    messages.push_back(std::move(msg));
  }
  return json{{"model", config.model_name},
              {"messages", messages},
              {"temperature", request.temperature.value_or(config.temperature)},
              {"max_tokens", request.max_output_tokens.value_or(config.max_output_tokens)},
              {"stream", false}};
}

ChatResponse OpenAiCompatBackend::parse_body(const json& body) {
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw ProviderError(ErrorKind::kMalformedResponse, "chat completion without choices");
  }
  const auto& choice = body["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
    throw ProviderError(ErrorKind::kMalformedResponse, "chat completion choice without message");
  }
  const auto& content = choice["message"].value("content", json());
  ChatResponse out;
  if (content.is_string()) {
    out.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") out.text += part.value("text", "");
    }
  } else {
    throw ProviderError(ErrorKind::kMalformedResponse, "chat completion message has no text content");
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    out.finish_reason = choice["finish_reason"].get<std::string>();
  }
  if (body.contains("usage")) out.usage = usage_from(body["usage"], "prompt_tokens", "completion_tokens", "total_tokens");
  return out;
}

ChatResponse OpenAiCompatBackend::send(const ChatRequest& request, const ProviderConfig& config) {
  const auto url = parse_url(config.endpoint);
  auto cli = make_client(url, config);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto path = url.path + "/chat/completions";
  auto res = cli->Post(path, headers, build_body(request, config).dump(), "application/json");
  return parse_body(classify(res, config.provider_id + " POST " + path));
}

json GeminiBackend::build_body(const ChatRequest& request, const ProviderConfig& config) {
  json contents = json::array();
  json system;
  for (const auto& m : request.messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ContentPart::Kind::kText) {
        parts.push_back({{"text", p.text}});
      } else {
        parts.push_back({{"inline_data",
                          {{"mime_type", mime_type(sniff_format(p.image.bytes()))},
                           {"data", base64_encode(p.image.bytes())}}}});
      }
    }
    if (m.role == Role::kSystem) {
      system = json{{"parts", parts}};
    } else {
      contents.push_back({{"role", m.role == Role::kAssistant ? "model" : "user"}, {"parts", parts}});
    }
  }
  json body{{"contents", contents},
            {"generationConfig",
             {{"temperature", request.temperature.value_or(config.temperature)},
              {"maxOutputTokens", request.max_output_tokens.value_or(config.max_output_tokens)}}}};
  if (!system.is_null()) body["systemInstruction"] = system;
  return body;
}

ChatResponse GeminiBackend::parse_body(const json& body) {
  if (!body.contains("candidates") || !body["candidates"].is_array() || body["candidates"].empty()) {
    throw ProviderError(ErrorKind::kMalformedResponse, "generateContent response without candidates");
  }
  const auto& cand = body["candidates"][0];
  if (!cand.is_object() || !cand.contains("content") || !cand["content"].contains("parts") ||
      !cand["content"]["parts"].is_array()) {
    throw ProviderError(ErrorKind::kMalformedResponse, "generateContent candidate without parts");
  }
  ChatResponse out;
  bool any_text = false;
  for (const auto& part : cand["content"]["parts"]) {
    if (part.is_object() && part.contains("text") && part["text"].is_string()) {
      out.text += part["text"].get<std::string>();
      any_text = true;
    }
  }
  if (!any_text) throw ProviderError(ErrorKind::kMalformedResponse, "generateContent candidate has no text part");
  if (cand.contains("finishReason") && cand["finishReason"].is_string()) {
    out.finish_reason = cand["finishReason"].get<std::string>();
  }
  if (body.contains("usageMetadata")) {
    out.usage = usage_from(body["usageMetadata"], "promptTokenCount", "candidatesTokenCount", "totalTokenCount");
  }
  return out;
}

ChatResponse GeminiBackend::send(const ChatRequest& request, const ProviderConfig& config) {
  const auto url = parse_url(config.endpoint);
  auto cli = make_client(url, config);
  httplib::Headers headers;
  std::string path = url.path + "/models/" + config.model_name + ":generateContent";
  const std::string logged_path = path;
  if (!api_key_.empty()) {
    if (config.api_key_in_query) {
      path += "?key=" + httplib::detail::encode_query_param(api_key_);
    } else {
      headers.emplace("x-goog-api-key", api_key_);
    }
  }
  auto res = cli->Post(path, headers, build_body(request, config).dump(), "application/json");
  return parse_body(classify(res, config.provider_id + " POST " + logged_path));
}

}  // namespace unac::provider
