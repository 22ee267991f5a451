#pragma once

// Answer matching: exact, numeric and choice tiers, then an optional judge.

#include "unac/domain.hpp"
#include "unac/session.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace unac {

enum class MatchMethod { kExact, kNumeric, kChoice, kJudge };
std::string_view to_string(MatchMethod m);
std::optional<MatchMethod> parse_match_method(std::string_view s);

struct MatchVerdict {
  bool correct = false;
  MatchMethod method = MatchMethod::kExact;  // the last tier consulted
  bool judge_error = false;
  std::string error;
};

/// Trim, casefold, collapse inner whitespace, drop one trailing period.
std::string normalize_answer(std::string_view s);

/// Last number in the text; "1,234.5" reads as 1234.5.
std::optional<double> last_number(std::string_view s);

/// Index of the choice a prediction designates: a letter ("B", "(B)", "B."),
/// a labelled choice ("B: 15"), or the choice text itself.
std::optional<std::size_t> predicted_choice(std::string_view predicted, const Task& task);

/// Tiers in order: exact; numeric (integer/float tasks); choice (multichoice
/// tasks); judge when `judge` is given and its roles bind a judge provider.
/// Deterministic tiers never call the judge. Judge failures give an
/// incorrect verdict with judge_error set.
MatchVerdict match_answer(const std::string& predicted, const Task& task, Session* judge = nullptr);

}  // namespace unac
