#pragma once

// Deterministic scripted backend for tests and offline runs.
//
// Lookup order for each request:
//   1. keyed responses, by request_digest(provider id, prompt, images);
//   2. substring rules, first rule whose every needle occurs in the prompt text;
//   3. the default response, when set.
// A miss is a malformed_response error that names the digest, so a fixture
// author can key the missing response.
//
// Fixture files are JSON Lines, one of:
//   {"key": "<digest>", "response": "..."}
//   {"contains": ["needle", ...], "response": "..."}
//   {"contains": ["needle", ...], "fail_status": 503}
//   {"default": "..."}

#include "unac/provider.hpp"

#include <filesystem>
#include <mutex>

namespace unac::provider {

class ScriptedBackend : public ChatBackend {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string response;
    int fail_status = 0;  // non-zero: fail with this HTTP status instead
  };

  static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& fixture);

  void add_keyed(std::string digest, std::string response);
  void add_rule(std::vector<std::string> contains, std::string response);
  void add_failure(std::vector<std::string> contains, int http_status);
  void set_default(std::string response);

  ChatResponse send(const ChatRequest& request, const ProviderConfig& config) override;

  std::size_t calls() const;
  std::vector<std::string> prompts() const;
  void clear_log();

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> keyed_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
  std::vector<std::string> prompts_;
};

}  // namespace unac::provider
