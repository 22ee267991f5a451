#pragma once

// Baseline-versus-method comparison of per-task verdicts.

#include "unac/harness.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace unac {

enum class ErrorCategory {
  kMisunderstanding,
  kContextLoss,
  kReasoningError,
  kFactualError,
  kMathError,
  kMisdirection,
  kContextError,
};
std::string_view to_string(ErrorCategory c);
/// Accepts the canonical names and spaced/underscored/lowercase variants.
std::optional<ErrorCategory> parse_error_category(std::string_view s);

class DiffError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ErrorDiff {
  std::set<std::string> corrected_ids;    // baseline wrong, ours right
  std::set<std::string> newly_wrong_ids;  // baseline right, ours wrong
  std::size_t baseline_wrong = 0;
  std::size_t baseline_right = 0;
  double corrected_fraction = 0.0;  // over baseline_wrong
  double new_error_fraction = 0.0;  // over baseline_right
  // Filled only from an annotation file.
  std::map<ErrorCategory, std::size_t> category_counts;
  bool annotated = false;
};

/// Annotation files are JSON Lines of {"task_id": ..., "category": ...}.
/// Throws DiffError when the two lists cover different task ids or an
/// annotation names an unknown task or category.
ErrorDiff diff_errors(const std::vector<EvalResult>& baseline, const std::vector<EvalResult>& ours,
                      const std::optional<std::filesystem::path>& annotations = std::nullopt);

/// "Corrected 25.4% of baseline errors (n/N), introduced 5.5% new errors (m/M)"
/// followed by one line per annotated category.
std::string render_diff(const ErrorDiff& diff);

}  // namespace unac
