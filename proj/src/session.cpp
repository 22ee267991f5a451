#include "unac/session.hpp"

#include <spdlog/spdlog.h>

namespace unac {

using provider::ErrorKind;
using provider::ProviderError;

Session::Session(const provider::ProviderSet& providers, provider::StageRoles roles, std::string task_id,
                 OnError policy)
    : providers_(providers), roles_(std::move(roles)), policy_(policy) {
  transcript_.task_id = std::move(task_id);
}

provider::ChatResponse Session::call(Stage stage, const provider::ChatRequest& request) {
  const auto& id = provider::stage_provider_id(roles_, stage);
  auto& p = providers_.get(id);
  const auto prompt = request.prompt_text();
  const auto images = request.image_digests();

  std::vector<provider::Attempt> attempts;
  auto record = [&](const provider::ChatResponse* response) {
    for (std::size_t i = 0; i < attempts.size(); ++i) {
      const auto& a = attempts[i];
      TranscriptEntry e;
      e.stage = stage;
      e.provider_id = id;
      e.prompt = prompt;
      e.attached_images = images;
      e.wall_time_ms = a.wall_time_ms;
      e.attempt = a.number;
      e.error = a.error;
      if (response && i + 1 == attempts.size()) {
        e.response = response->text;
        e.cached = response->cached;
      }
      transcript_.entries.push_back(std::move(e));
    }
  };

  try {
    auto response = p.chat(request, &attempts);
    record(&response);
    if (response.usage) tokens_used_ += response.usage->total_tokens;
    return response;
  } catch (const ProviderError& e) {
    if (attempts.empty()) attempts.push_back(provider::Attempt{1, 0, e.what(), 0});
    record(nullptr);
    const bool fatal = e.kind() == ErrorKind::kAuth || e.kind() == ErrorKind::kConfig ||
                       e.kind() == ErrorKind::kUnknownProvider || e.kind() == ErrorKind::kPrecondition;
    if (policy_ == OnError::kPropagate || fatal) throw;
    ++failed_calls_;
    warn(std::string(to_string(stage)) + ": provider call failed, continuing degraded: " + e.what());
    return provider::ChatResponse{};
  }
}

void Session::warn(std::string message) {
  spdlog::debug("[{}] {}", transcript_.task_id, message);
  transcript_.warnings.push_back(std::move(message));
}

void Session::record_tool_call(ToolCall call) { transcript_.tool_calls.push_back(std::move(call)); }

}  // namespace unac
