#include "unac/answer_match.hpp"

#include "unac/prompts.hpp"
#include "unac/text.hpp"

#include <cmath>
#include <regex>

namespace unac {
namespace {

std::vector<std::string> alternatives(const std::string& ground_truth) {
  // MM-Vet style "a <OR> b"
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = ground_truth.find("<OR>", start);
    out.push_back(ground_truth.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 4;
  }
  return out;
}

bool numbers_match(double p, double g, const Task& task) {
  const double scale = std::max(std::fabs(p), std::fabs(g));
  if (std::fabs(p - g) <= 1e-6 * scale) return true;
  if (task.answer_type == AnswerType::kFloat && task.decimal_precision) {
    const double f = std::pow(10.0, *task.decimal_precision);
    return std::llround(p * f) == std::llround(g * f);
  }
  return false;
}

std::optional<std::size_t> letter_index(char c, const Task& task) {
  if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
  const auto idx = static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(c)) - 'A');
  if (idx < task.choices.size()) return idx;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::kExact: return "exact";
    case MatchMethod::kNumeric: return "numeric";
    case MatchMethod::kChoice: return "choice";
    case MatchMethod::kJudge: return "judge";
  }
  return "exact";
}

std::optional<MatchMethod> parse_match_method(std::string_view s) {
  for (auto m : {MatchMethod::kExact, MatchMethod::kNumeric, MatchMethod::kChoice, MatchMethod::kJudge}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : text::lower(text::trim(s))) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  if (!out.empty() && out.back() == '.') out.pop_back();
  return text::trim(out);
}

std::optional<double> last_number(std::string_view s) {
  static const std::regex kNumber(R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+)");
  const std::string str(s);
  std::optional<double> last;
  for (auto it = std::sregex_iterator(str.begin(), str.end(), kNumber); it != std::sregex_iterator(); ++it) {
    std::string digits;
    for (char c : it->str()) {
      if (c != ',') digits += c;
    }
    try {
      last = std::stod(digits);
    } catch (const std::exception&) {
    }
  }
  return last;
}

std::optional<std::size_t> predicted_choice(std::string_view predicted, const Task& task) {
  const auto t = normalize_answer(predicted);
  if (t.empty()) return std::nullopt;
  static const std::regex kLetter(R"(^\(?([a-z])\)?[.:)]?$)");
  static const std::regex kLabelled(R"(^\(?([a-z])[.:)]\s+(.*)$)");
  std::smatch m;
  if (std::regex_match(t, m, kLetter)) return letter_index(m[1].str()[0], task);
  for (std::size_t i = 0; i < task.choices.size(); ++i) {
    if (t == normalize_answer(strip_choice_label(task.choices[i])) || t == normalize_answer(task.choices[i])) {
      return i;
    }
  }
  if (std::regex_match(t, m, kLabelled)) return letter_index(m[1].str()[0], task);
  // last "(X)" anywhere, e.g. "so the answer is (C)"
  static const std::regex kParen(R"(\(([A-Z])\))");
  const std::string raw(predicted);
  std::optional<std::size_t> last;
  for (auto it = std::sregex_iterator(raw.begin(), raw.end(), kParen); it != std::sregex_iterator(); ++it) {
    if (auto idx = letter_index((*it)[1].str()[0], task)) last = idx;
  }
  return last;
}

MatchVerdict match_answer(const std::string& predicted, const Task& task, Session* judge) {
  MatchVerdict v;
  const auto p = normalize_answer(predicted);
  v.method = MatchMethod::kExact;
  for (const auto& alt : alternatives(task.ground_truth)) {
    if (!p.empty() && p == normalize_answer(alt)) {
      v.correct = true;
      return v;
    }
  }

  if (task.answer_type == AnswerType::kInteger || task.answer_type == AnswerType::kFloat) {
    v.method = MatchMethod::kNumeric;
    const auto pn = last_number(predicted);
    const auto gn = last_number(task.ground_truth);
    if (pn && gn && numbers_match(*pn, *gn, task)) {
      v.correct = true;
      return v;
    }
  }

  if (task.answer_type == AnswerType::kMultichoice) {
    v.method = MatchMethod::kChoice;
    const auto want = ground_truth_choice_index(task);
    const auto got = predicted_choice(predicted, task);
    if (want && got && *want == *got) {
      v.correct = true;
      return v;
    }
  }

  if (!judge || !judge->roles().judge) return v;
  v.method = MatchMethod::kJudge;
  try {
    const prompts::Vars vars{{"question", task.question},
                             {"ground_truth", task.ground_truth},
                             {"prediction", predicted}};
    const auto prompt = prompts::render_named("judge", vars);
    const auto failed_before = judge->failed_calls();
    const auto response = judge->call(Stage::kJudge, provider::ChatRequest::user(prompt));
    if (judge->failed_calls() != failed_before) {
      v.judge_error = true;
      v.error = "judge call failed";
      return v;
    }
    const auto w = text::words(response.text);
    const bool yes = !w.empty() && w.front() == "yes";
    const bool no = !w.empty() && w.front() == "no";
    if (!yes && !no) {
      v.judge_error = true;
      v.error = "judge reply is neither YES nor NO";
      return v;
    }
    v.correct = yes;
  } catch (const std::exception& e) {
    v.judge_error = true;
    v.error = std::string("judge: ") + e.what();
  }
  return v;
}

}  // namespace unac
