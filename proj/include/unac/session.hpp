#pragma once

#include "unac/domain.hpp"
#include "unac/provider.hpp"

namespace unac {

/// Routes each stage's chat call to its role-bound provider and records every
/// attempt in the task's Transcript. One Session per task run; not shared
/// between threads.
class Session {
 public:
  /// kPropagate rethrows provider errors. kDegrade swallows every non-auth,
  /// non-config provider error, records a warning and returns an empty
  /// response so the calling stage takes its parse fallback.
  enum class OnError { kPropagate, kDegrade };

  Session(const provider::ProviderSet& providers, provider::StageRoles roles, std::string task_id,
          OnError policy = OnError::kPropagate);

  provider::ChatResponse call(Stage stage, const provider::ChatRequest& request);

  void warn(std::string message);
  void record_tool_call(ToolCall call);

  const Transcript& transcript() const { return transcript_; }
  Transcript take_transcript() { return std::move(transcript_); }
  const provider::StageRoles& roles() const { return roles_; }
  const provider::ProviderSet& providers() const { return providers_; }

  /// Calls that failed for good and were degraded.
  std::size_t failed_calls() const { return failed_calls_; }
  std::int64_t tokens_used() const { return tokens_used_; }

 private:
  const provider::ProviderSet& providers_;
  provider::StageRoles roles_;
  OnError policy_;
  Transcript transcript_;
  std::size_t failed_calls_ = 0;
  std::int64_t tokens_used_ = 0;
};

}  // namespace unac
