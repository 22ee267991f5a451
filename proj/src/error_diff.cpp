#include "unac/error_diff.hpp"

#include "unac/domain_io.hpp"
#include "unac/text.hpp"

#include <fmt/format.h>

#include <map>

namespace unac {
namespace {

constexpr ErrorCategory kAll[] = {
    ErrorCategory::kMisunderstanding, ErrorCategory::kContextLoss,  ErrorCategory::kReasoningError,
    ErrorCategory::kFactualError,     ErrorCategory::kMathError,    ErrorCategory::kMisdirection,
    ErrorCategory::kContextError,
};

std::string squash(std::string_view s) {
  std::string out;
  for (char c : text::lower(s)) {
    if (c != ' ' && c != '_' && c != '-') out += c;
  }
  return out;
}

std::map<std::string, bool> verdicts(const std::vector<EvalResult>& results, const char* which) {
  std::map<std::string, bool> out;
  for (const auto& r : results) {
    if (!out.emplace(r.task_id, r.correct).second) {
      throw DiffError(fmt::format("{} results list task '{}' twice", which, r.task_id));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kMisunderstanding: return "Misunderstanding";
    case ErrorCategory::kContextLoss: return "ContextLoss";
    case ErrorCategory::kReasoningError: return "ReasoningError";
    case ErrorCategory::kFactualError: return "FactualError";
    case ErrorCategory::kMathError: return "MathError";
    case ErrorCategory::kMisdirection: return "Misdirection";
    case ErrorCategory::kContextError: return "ContextError";
  }
  return "Misunderstanding";
}

std::optional<ErrorCategory> parse_error_category(std::string_view s) {
  const auto key = squash(s);
  for (auto c : kAll) {
    if (squash(to_string(c)) == key) return c;
  }
  return std::nullopt;
}

ErrorDiff diff_errors(const std::vector<EvalResult>& baseline, const std::vector<EvalResult>& ours,
                      const std::optional<std::filesystem::path>& annotations) {
  const auto base = verdicts(baseline, "baseline");
  const auto mine = verdicts(ours, "ours");
  for (const auto& [id, _] : base) {
    if (!mine.count(id)) throw DiffError("task '" + id + "' is in the baseline results only");
  }
  for (const auto& [id, _] : mine) {
    if (!base.count(id)) throw DiffError("task '" + id + "' is in our results only");
  }

  ErrorDiff d;
  for (const auto& [id, base_ok] : base) {
    const bool ours_ok = mine.at(id);
    if (base_ok) {
      ++d.baseline_right;
      if (!ours_ok) d.newly_wrong_ids.insert(id);
    } else {
      ++d.baseline_wrong;
      if (ours_ok) d.corrected_ids.insert(id);
    }
  }
  if (d.baseline_wrong) {
    d.corrected_fraction = static_cast<double>(d.corrected_ids.size()) / static_cast<double>(d.baseline_wrong);
  }
  if (d.baseline_right) {
    d.new_error_fraction = static_cast<double>(d.newly_wrong_ids.size()) / static_cast<double>(d.baseline_right);
  }

  if (annotations) {
    d.annotated = true;
    std::vector<nlohmann::json> records;
    try {
      records = read_jsonl(*annotations);
    } catch (const std::exception& e) {
      throw DiffError(std::string("annotations: ") + e.what());
    }
    for (auto c : {ErrorCategory::kMisunderstanding, ErrorCategory::kContextLoss, ErrorCategory::kReasoningError,
                   ErrorCategory::kFactualError}) {
      d.category_counts[c] = 0;
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const auto where = annotations->string() + ":" + std::to_string(i + 1);
      if (!r.contains("task_id") || !r.contains("category") || !r["task_id"].is_string() ||
          !r["category"].is_string()) {
        throw DiffError(where + ": needs string fields task_id and category");
      }
      const auto id = r["task_id"].get<std::string>();
      if (!base.count(id)) throw DiffError(where + ": unknown task '" + id + "'");
      const auto cat = parse_error_category(r["category"].get<std::string>());
      if (!cat) throw DiffError(where + ": unknown category '" + r["category"].get<std::string>() + "'");
      ++d.category_counts[*cat];
    }
  }
  return d;
}

std::string render_diff(const ErrorDiff& d) {
  std::string out = fmt::format("Corrected {:.1f}% of baseline errors ({}/{}), introduced {:.1f}% new errors ({}/{})\n",
                                100.0 * d.corrected_fraction, d.corrected_ids.size(), d.baseline_wrong,
                                100.0 * d.new_error_fraction, d.newly_wrong_ids.size(), d.baseline_right);
  if (d.annotated) {
    std::size_t total = 0;
    for (const auto& [_, n] : d.category_counts) total += n;
    out += fmt::format("Annotated cases: {}\n", total);
    for (auto c : kAll) {
      auto it = d.category_counts.find(c);
      if (it == d.category_counts.end()) continue;
      out += fmt::format("  {:<16} {:>5}\n", to_string(c), it->second);
    }
  }
  return out;
}

}  // namespace unac
