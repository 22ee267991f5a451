#pragma once

// Decomposition, sub-question answering, per-step checking, the single-pass
// review baseline, the conclusion, and the full pipeline composition.

#include "unac/abstraction.hpp"
#include "unac/domain.hpp"
#include "unac/session.hpp"
#include "unac/toolclient.hpp"
#include "unac/visprompt.hpp"

#include <optional>
#include <string>
#include <vector>

namespace unac {

enum class ConcludeImage { kMarked, kOriginal, kNone };
std::string_view to_string(ConcludeImage c);
std::optional<ConcludeImage> parse_conclude_image(std::string_view s);

struct PipelineConfig {
  CheckMode mode = CheckMode::kGradual;
  int max_subq = 5;
  ConcludeImage conclude_image = ConcludeImage::kMarked;
  VisPromptConfig visprompt;
};

/// Throws std::invalid_argument naming the bad field.
void validate(const PipelineConfig& config);

/// "Answer with a single integer." and friends, by answer type.
std::string answer_instruction(const Task& task);

/// "Q<n>:" lines in order, at most max_subq of them.
std::vector<std::string> parse_subquestions(const std::string& response, int max_subq);

/// Falls back to the original question when no Q lines parse.
std::vector<std::string> decompose(Session& session, const Task& task, const MarkedImage& marked,
                                   const Abstraction& abstraction, int max_subq);

/// One call per sub-question; call i sees (Q_j, A_j) for every j < i.
std::vector<std::string> answer_subquestions(Session& session, const Task& task,
                                             const std::vector<std::string>& sub_questions,
                                             const MarkedImage& marked, const Abstraction& abstraction);

/// One call per step. Step i sees Q_0..Q_i, the checked answers A'_0..A'_{i-1}
/// and the candidate A_i; A'_i is the CHECKED line, or A_i when there is none.
std::vector<std::string> gradual_check(Session& session, const Task& task,
                                       const std::vector<std::string>& sub_questions,
                                       const std::vector<std::string>& raw_answers, const MarkedImage& marked,
                                       const Abstraction& abstraction);

/// The single review pass: replays the solution as an assistant turn, then
/// sends the fixed review sentence. Returns the FINAL line of the reply, or
/// the draft when there is none.
std::string global_check(Session& session, const Task& task, const std::vector<std::string>& sub_questions,
                         const std::vector<std::string>& raw_answers, const std::string& draft,
                         const MarkedImage& marked, const Abstraction& abstraction);

/// FINAL line of the conclusion; falls back to the whole reply, then the last
/// answer, so the result is never empty.
std::string conclude(Session& session, const Task& task, const std::vector<std::string>& sub_questions,
                     const std::vector<std::string>& answers, const std::string& review,
                     const std::optional<ImageBlob>& image);

struct RunResult {
  std::string final_answer;
  CheckSession check;
  VisualPrompt visual;
  Abstraction abstraction;
  Transcript transcript;
};

/// Runs every stage against an existing session; provider errors other than
/// auth/config ones should already be degraded by the session policy.
RunResult run_pipeline(Session& session, const Task& task, tools::ToolClient& tools, const PipelineConfig& config);

/// Same with a fresh degrading Session. Throws ProviderError only for
/// auth/config-class failures.
RunResult run_pipeline(const Task& task, const provider::ProviderSet& providers, const provider::StageRoles& roles,
                       tools::ToolClient& tools, const PipelineConfig& config);

}  // namespace unac
