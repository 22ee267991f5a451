#include "unac/checking.hpp"

#include "unac/prompts.hpp"
#include "unac/text.hpp"

#include <regex>
#include <stdexcept>

namespace unac {
namespace {

using provider::ChatMessage;
using provider::ChatRequest;
using provider::ContentPart;
using provider::Role;

std::string qa_lines(const std::vector<std::string>& qs, const std::vector<std::string>& as, std::size_t n) {
  std::string out;
  for (std::size_t j = 0; j < n; ++j) {
    if (!out.empty()) out += '\n';
    out += "Q" + std::to_string(j + 1) + ": " + qs[j] + "\nA" + std::to_string(j + 1) + ": " + as[j];
  }
  return out;
}

}  // namespace

std::string_view to_string(ConcludeImage c) {
  switch (c) {
    case ConcludeImage::kMarked: return "marked";
    case ConcludeImage::kOriginal: return "original";
    case ConcludeImage::kNone: return "none";
  }
  return "marked";
}

std::optional<ConcludeImage> parse_conclude_image(std::string_view s) {
  if (s == "marked") return ConcludeImage::kMarked;
  if (s == "original") return ConcludeImage::kOriginal;
  if (s == "none") return ConcludeImage::kNone;
  return std::nullopt;
}

void validate(const PipelineConfig& config) {
  if (config.max_subq < 1) throw std::invalid_argument("pipeline.max_subq must be >= 1");
  validate(config.visprompt);
}

std::string answer_instruction(const Task& task) {
  switch (task.answer_type) {
    case AnswerType::kInteger:
      return "Answer with a single integer.";
    case AnswerType::kFloat:
      if (task.decimal_precision) {
        return "Answer with a single number rounded to " + std::to_string(*task.decimal_precision) +
               " decimal places.";
      }
      return "Answer with a single number.";
    case AnswerType::kMultichoice:
      return "Answer with the letter of the correct choice.";
    case AnswerType::kText:
      return "Answer with a single word or a short phrase.";
  }
  return {};
}

std::vector<std::string> parse_subquestions(const std::string& response, int max_subq) {
  static const std::regex kLine(R"(^[\s*_#>-]*Q\s*\d+\s*[:.)][\s*_]*(.*)$)", std::regex::icase);
  std::vector<std::string> out;
  for (const auto& line : text::split_lines(response)) {
    if (static_cast<int>(out.size()) >= max_subq) break;
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) continue;
    auto q = text::trim(m[1].str());
    if (!q.empty()) out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::string> decompose(Session& session, const Task& task, const MarkedImage& marked,
                                   const Abstraction& abstraction, int max_subq) {
  if (max_subq < 1) throw std::invalid_argument("decompose: max_subq must be >= 1");
  const prompts::Vars vars{{"abstraction", render_abstraction(abstraction)},
                           {"question", task.question},
                           {"choices", render_choices(task)},
                           {"max_subq", std::to_string(max_subq)}};
  const auto prompt = prompts::render_named("decompose", vars);
  const auto response = session.call(Stage::kDecompose, ChatRequest::user(prompt, {marked.image}));
  auto subqs = parse_subquestions(response.text, max_subq);
  if (subqs.empty()) {
    session.warn("decompose: no Q lines, using the question itself");
    subqs.push_back(task.question);
  }
  return subqs;
}

std::vector<std::string> answer_subquestions(Session& session, const Task& task,
                                             const std::vector<std::string>& sub_questions,
                                             const MarkedImage& marked, const Abstraction& abstraction) {
  if (sub_questions.empty()) throw std::invalid_argument("answer_subquestions: no sub-questions");
  const auto abs = render_abstraction(abstraction);
  std::vector<std::string> answers;
  for (std::size_t i = 0; i < sub_questions.size(); ++i) {
    const prompts::Vars vars{{"abstraction", abs},
                             {"question", task.question},
                             {"previous", qa_lines(sub_questions, answers, i)},
                             {"sub_question", sub_questions[i]}};
    const auto prompt = prompts::render_named("answer", vars);
    const auto response = session.call(Stage::kAnswer, ChatRequest::user(prompt, {marked.image}));
    auto a = text::trim(response.text);
    if (a.empty()) session.warn("answer: empty answer to sub-question " + std::to_string(i + 1));
    answers.push_back(std::move(a));
  }
  return answers;
}

std::vector<std::string> gradual_check(Session& session, const Task& task,
                                       const std::vector<std::string>& sub_questions,
                                       const std::vector<std::string>& raw_answers, const MarkedImage& marked,
                                       const Abstraction& abstraction) {
  if (sub_questions.empty() || sub_questions.size() != raw_answers.size()) {
    throw std::invalid_argument("gradual_check: sub-questions and answers must align and be non-empty");
  }
  const auto abs = render_abstraction(abstraction);
  std::vector<std::string> checked;
  for (std::size_t i = 0; i < sub_questions.size(); ++i) {
    const prompts::Vars vars{{"abstraction", abs},
                             {"question", task.question},
                             {"checked", qa_lines(sub_questions, checked, i)},
                             {"sub_question", sub_questions[i]},
                             {"candidate", raw_answers[i]}};
    const auto prompt = prompts::render_named("check_gradual", vars);
    const auto response = session.call(Stage::kCheck, ChatRequest::user(prompt, {marked.image}));
    auto parsed = text::last_tagged_line(response.text, "CHECKED:");
    if (parsed && !parsed->empty()) {
      checked.push_back(std::move(*parsed));
    } else {
      session.warn("check: no CHECKED line at step " + std::to_string(i + 1) + ", keeping the raw answer");
      checked.push_back(raw_answers[i]);
    }
  }
  return checked;
}

std::string global_check(Session& session, const Task& task, const std::vector<std::string>& sub_questions,
                         const std::vector<std::string>& raw_answers, const std::string& draft,
                         const MarkedImage& marked, const Abstraction& abstraction) {
  const prompts::Vars vars{{"abstraction", render_abstraction(abstraction)},
                           {"question", task.question},
                           {"choices", render_choices(task)},
                           {"answer_instruction", answer_instruction(task)}};
  const auto first = prompts::render_named("global_solve", vars);
  std::string replay = qa_lines(sub_questions, raw_answers, std::min(sub_questions.size(), raw_answers.size()));
  if (!replay.empty()) replay += '\n';
  replay += "FINAL: " + draft;

  ChatRequest req;
  req.messages.push_back(ChatMessage{Role::kUser, {ContentPart::image_part(marked.image), ContentPart::text_part(first)}});
  req.messages.push_back(ChatMessage{Role::kAssistant, {ContentPart::text_part(replay)}});
  req.messages.push_back(
      ChatMessage{Role::kUser, {ContentPart::text_part(std::string(prompts::kGlobalCheckSentence))}});
  const auto response = session.call(Stage::kCheck, req);
  auto parsed = text::last_tagged_line(response.text, "FINAL:");
  if (parsed && !parsed->empty()) return *parsed;
  session.warn("check: review reply has no FINAL line, keeping the draft");
  return draft;
}

std::string conclude(Session& session, const Task& task, const std::vector<std::string>& sub_questions,
                     const std::vector<std::string>& answers, const std::string& review,
                     const std::optional<ImageBlob>& image) {
  if (sub_questions.size() != answers.size()) {
    throw std::invalid_argument("conclude: sub-questions and answers must align");
  }
  const prompts::Vars vars{{"question", task.question},
                           {"choices", render_choices(task)},
                           {"steps", qa_lines(sub_questions, answers, answers.size())},
                           {"review", review},
                           {"answer_instruction", answer_instruction(task)}};
  const auto prompt = prompts::render_named("conclude", vars);
  std::vector<ImageBlob> images;
  if (image) images.push_back(*image);
  const auto response = session.call(Stage::kConclude, ChatRequest::user(prompt, std::move(images)));

  if (auto parsed = text::last_tagged_line(response.text, "FINAL:"); parsed && !parsed->empty()) return *parsed;
  auto full = text::trim(response.text);
  if (!full.empty()) {
    session.warn("conclude: no FINAL line, using the whole reply");
    return full;
  }
  if (!review.empty()) {
    session.warn("conclude: empty reply, using the reviewed answer");
    return review;
  }
  for (auto it = answers.rbegin(); it != answers.rend(); ++it) {
    if (!text::trim(*it).empty()) {
      session.warn("conclude: empty reply, using the last sub-answer");
      return text::trim(*it);
    }
  }
  session.warn("conclude: nothing to conclude from");
  return "no answer";
}

RunResult run_pipeline(Session& session, const Task& task, tools::ToolClient& tools, const PipelineConfig& config) {
  validate(config);
  RunResult out;
  out.visual = build_visual_prompt(session, task, tools, config.visprompt);
  const auto& marked = out.visual.marked;

  const auto global = abstract_global(session, marked, task);
  out.abstraction = abstract_local(session, marked, task, global);

  auto& cs = out.check;
  cs.mode = config.mode;
  cs.sub_questions = decompose(session, task, marked, out.abstraction, config.max_subq);
  cs.raw_answers = answer_subquestions(session, task, cs.sub_questions, marked, out.abstraction);

  std::string review;
  const std::vector<std::string>* basis = &cs.raw_answers;
  switch (config.mode) {
    case CheckMode::kGradual:
      cs.checked_answers = gradual_check(session, task, cs.sub_questions, cs.raw_answers, marked, out.abstraction);
      basis = &cs.checked_answers;
      break;
    case CheckMode::kGlobal: {
      auto draft = cs.raw_answers.back();
      if (draft.empty()) draft = "(no answer)";
      cs.global_revision = global_check(session, task, cs.sub_questions, cs.raw_answers, draft, marked,
                                        out.abstraction);
      review = cs.global_revision;
      break;
    }
    case CheckMode::kNone:
      break;
  }

  std::optional<ImageBlob> image;
  if (config.conclude_image == ConcludeImage::kMarked) image = marked.image;
  if (config.conclude_image == ConcludeImage::kOriginal) image = task.image;
  cs.conclusion = conclude(session, task, cs.sub_questions, *basis, review, image);
  out.final_answer = cs.conclusion;
  out.transcript = session.transcript();
  return out;
}

RunResult run_pipeline(const Task& task, const provider::ProviderSet& providers, const provider::StageRoles& roles,
                       tools::ToolClient& tools, const PipelineConfig& config) {
  Session session(providers, roles, task.id, Session::OnError::kDegrade);
  auto out = run_pipeline(session, task, tools, config);
  out.transcript = session.take_transcript();
  return out;
}

}  // namespace unac
