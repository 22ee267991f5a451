#include "unac/visprompt.hpp"

#include "unac/prompts.hpp"
#include "unac/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace unac {
namespace {

bool has_keyword(const std::vector<std::string>& words, std::initializer_list<std::string_view> keys) {
  for (const auto& w : words) {
    for (auto k : keys) {
      if (w == k || w == std::string(k) + "s") return true;
    }
  }
  return false;
}

MarkedImage unmarked(const ImageBlob& image) {
  try {
    return overlay_markers(image, {});
  } catch (const ImageError&) {
    return MarkedImage{image, {}, image.digest()};
  }
}

}  // namespace

ParsedNeeds parse_info_needs(const std::string& response) {
  ParsedNeeds out;
  out.needs.rationale = response;

  if (auto targets = text::last_tagged_line(response, "TARGETS:")) {
    for (auto& t : text::split(*targets, ',')) {
      auto v = text::trim(t);
      while (!v.empty() && v.back() == '.') v.pop_back();
      if (!v.empty() && text::lower(v) != "none") out.needs.targets.push_back(v);
    }
  }

  if (auto kinds = text::last_tagged_line(response, "KINDS:")) {
    const auto w = text::words(*kinds);
    const bool both = has_keyword(w, {"both"});
    const bool none = has_keyword(w, {"none"});
    const bool objects = has_keyword(w, {"object"});
    const bool symbols = has_keyword(w, {"symbol"});
    if (both || none || objects || symbols) {
      out.kinds_line_found = true;
      out.needs.semantic_objects = both || objects;
      out.needs.literal_symbols = both || symbols;
      return out;
    }
  }

  const auto w = text::words(response);
  out.needs.semantic_objects = has_keyword(w, {"object", "item", "shape"});
  out.needs.literal_symbols = has_keyword(w, {"text", "number", "label", "symbol"});
  out.keyword_fallback_hit = out.needs.semantic_objects || out.needs.literal_symbols;
  return out;
}

InfoNeeds analyze_question(Session& session, const Task& task) {
  prompts::Vars vars{{"question", task.question}, {"choices", render_choices(task)}};
  const auto prompt = prompts::render_named("analyze", vars);
  const auto response = session.call(Stage::kAnalyze, provider::ChatRequest::user(prompt, {task.image}));
  auto parsed = parse_info_needs(response.text);
  if (!parsed.kinds_line_found) {
    session.warn(parsed.keyword_fallback_hit ? "analyze: no KINDS line, used keyword fallback"
                                             : "analyze: no KINDS line and no keywords, continuing unmarked");
  }
  return parsed.needs;
}

std::vector<Region> denoise_regions(const std::vector<Region>& regions, double threshold, int max_regions) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].stability_score >= threshold) keep.push_back(i);
  }
  const auto cap = static_cast<std::size_t>(std::max(max_regions, 0));
  if (keep.size() > cap) {
    std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = regions[a];
      const auto& rb = regions[b];
      if (ra.stability_score != rb.stability_score) return ra.stability_score > rb.stability_score;
      if (ra.bbox.area() != rb.bbox.area()) return ra.bbox.area() < rb.bbox.area();
      return std::tie(ra.bbox.y, ra.bbox.x, a) < std::tie(rb.bbox.y, rb.bbox.x, b);
    });
    keep.resize(cap);
  }
  std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(regions[a].bbox.y, regions[a].bbox.x, a) < std::tie(regions[b].bbox.y, regions[b].bbox.x, b);
  });
  std::vector<Region> out;
  out.reserve(keep.size());
  for (auto i : keep) {
    out.push_back(regions[i]);
    out.back().id = static_cast<int>(out.size());
  }
  return out;
}

void validate(const VisPromptConfig& config) {
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) {
    throw std::invalid_argument("visprompt.threshold must be in [0,1]");
  }
  if (config.max_regions < 1) throw std::invalid_argument("visprompt.max_regions must be >= 1");
  validate(config.style);
}

VisualPrompt build_visual_prompt(Session& session, const Task& task, tools::ToolClient& tools,
                                 const VisPromptConfig& config) {
  VisualPrompt out;
  out.needs = analyze_question(session, task);
  auto plan = tools::plan_from(out.needs);
  if (!plan.any()) {
    out.marked = unmarked(task.image);
    return out;
  }
  if (config.segment_prompted && plan.run_segmentation) plan.text_prompts = out.needs.targets;

  std::vector<Region> fetched;
  try {
    auto result = tools.fetch_regions(plan, task.image);
    for (auto& c : result.calls) session.record_tool_call(std::move(c));
    for (auto& w : result.warnings) session.warn("tool: " + w);
    fetched = std::move(result.regions);
  } catch (const tools::ToolError& e) {
    for (const auto& c : e.calls) session.record_tool_call(c);
    session.warn(std::string("tool call failed, continuing unmarked: ") + e.what());
    out.marked = unmarked(task.image);
    return out;
  }

  out.regions = denoise_regions(fetched, config.threshold, config.max_regions);
  if (out.regions.empty() && !fetched.empty()) {
    session.warn("no region passed the stability threshold");
  }
  try {
    out.marked = overlay_markers(task.image, out.regions, config.style);
  } catch (const std::exception& e) {
    session.warn(std::string("overlay failed, continuing unmarked: ") + e.what());
    out.regions.clear();
    out.marked = unmarked(task.image);
  }
  return out;
}

std::string render_legend(const MarkedImage& marked) {
  std::string out;
  for (const auto& e : marked.legend) {
    if (!out.empty()) out += '\n';
    out += "[" + std::to_string(e.region_id) + "] ";
    if (e.kind == RegionKind::kTextBox) {
      out += "text \"" + e.text + "\"";
    } else {
      out += "object";
    }
  }
  return out;
}

}  // namespace unac
