#include "unac/abstraction.hpp"

#include "unac/prompts.hpp"
#include "unac/text.hpp"
#include "unac/visprompt.hpp"

#include <algorithm>
#include <charconv>
#include <map>

namespace unac {
namespace {

std::optional<int> parse_id(std::string_view s) {
  auto t = text::trim(s);
  // tolerate "marker 2", "#2", "[2]"
  std::string digits;
  for (char c : t) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
    } else if (!digits.empty()) {
      break;
    }
  }
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  int v = 0;
  std::from_chars(digits.data(), digits.data() + digits.size(), v);
  return v;
}

}  // namespace

std::string abstract_global(Session& session, const MarkedImage& marked, const Task& task) {
  const prompts::Vars vars{{"markers", render_legend(marked)}, {"question", task.question}};
  const auto prompt = prompts::render_named("abstract_global", vars);
  auto response = session.call(Stage::kAbstractGlobal, provider::ChatRequest::user(prompt, {marked.image}));
  auto desc = text::trim(response.text);
  if (desc.empty()) session.warn("abstract_global: empty description");
  return desc;
}

ParsedLocal parse_local(const std::string& response, const MarkedImage& marked) {
  ParsedLocal out;
  auto relevant = text::last_tagged_line(response, "RELEVANT:");
  if (!relevant) {
    out.warnings.emplace_back("abstract_local: no RELEVANT line");
  } else {
    for (const auto& part : text::split(*relevant, ',')) {
      const auto lowered = text::lower(text::trim(part));
      if (lowered.empty() || lowered == "none") continue;
      const auto id = parse_id(part);
      if (!id) {
        out.warnings.push_back("abstract_local: unreadable marker '" + text::trim(part) + "'");
        continue;
      }
      if (!marked.has_region(*id)) {
        out.warnings.push_back("abstract_local: marker " + std::to_string(*id) + " is not in the legend");
        continue;
      }
      if (std::find(out.relevant_ids.begin(), out.relevant_ids.end(), *id) != out.relevant_ids.end()) continue;
      if (static_cast<int>(out.relevant_ids.size()) == kMaxLocalDetails) {
        out.warnings.push_back("abstract_local: more than " + std::to_string(kMaxLocalDetails) +
                               " markers listed, rest ignored");
        break;
      }
      out.relevant_ids.push_back(*id);
    }
  }

  // DETAIL lines, first one per id wins; kept in RELEVANT order.
  std::map<int, std::string> details;
  for (const auto& raw : text::split_lines(response)) {
    const auto line = text::trim(raw);
    if (text::lower(line).rfind("detail", 0) != 0) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const auto id = parse_id(std::string_view(line).substr(6, colon - 6));
    if (!id) continue;
    details.emplace(*id, text::trim(std::string_view(line).substr(colon + 1)));
  }
  for (int id : out.relevant_ids) {
    if (auto it = details.find(id); it != details.end()) out.details.push_back({id, it->second});
  }
  return out;
}

Abstraction abstract_local(Session& session, const MarkedImage& marked, const Task& task,
                           const std::string& global_description) {
  Abstraction out;
  out.global_description = global_description;
  if (!marked.has_markers()) return out;

  const prompts::Vars vars{{"markers", render_legend(marked)},
                           {"global_description", global_description},
                           {"question", task.question}};
  const auto prompt = prompts::render_named("abstract_local", vars);
  auto response = session.call(Stage::kAbstractLocal, provider::ChatRequest::user(prompt, {marked.image}));
  auto parsed = parse_local(response.text, marked);
  for (auto& w : parsed.warnings) session.warn(std::move(w));
  out.relevant_region_ids = std::move(parsed.relevant_ids);
  out.local_details = std::move(parsed.details);
  return out;
}

std::string render_abstraction(const Abstraction& abstraction) {
  std::string out = abstraction.global_description.empty() ? "(no description available)"
                                                           : abstraction.global_description;
  if (!abstraction.local_details.empty()) {
    out += "\nDetails of marked regions:";
    for (const auto& d : abstraction.local_details) {
      out += "\n- marker " + std::to_string(d.region_id) + ": " + d.detail;
    }
  }
  return out;
}

}  // namespace unac
