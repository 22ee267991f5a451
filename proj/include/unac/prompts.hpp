#pragma once

// Prompt templates are versioned text assets (assets/prompts/*.txt) compiled
// into the library. Syntax:
//   {{name}}                 substitute variable
//   {{#name}} ... {{/name}}  keep block when the variable is non-empty
//   {{^name}} ... {{/name}}  keep block when the variable is empty
//   lines starting with "#!" are comments
// A section tag alone on its line removes that whole line from the output.

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace unac::prompts {

/// Bumped whenever any template's rendered text changes.
inline constexpr int kTemplateVersion = 1;

/// The fixed sentence of the single-pass review baseline.
inline constexpr std::string_view kGlobalCheckSentence = "Please check your answer if there are any errors.";

using Vars = std::map<std::string, std::string, std::less<>>;

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws TemplateError on unknown variables or unbalanced sections.
std::string render(std::string_view tmpl, const Vars& vars);

/// Raw template text by name; throws TemplateError when unknown.
std::string_view get(std::string_view name);
std::vector<std::string> names();

inline std::string render_named(std::string_view name, const Vars& vars) { return render(get(name), vars); }

}  // namespace unac::prompts
