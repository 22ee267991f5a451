#pragma once

// Adaptive visual prompting: question analysis, tool routing, region
// denoising and numbered-marker overlay.

#include "unac/domain.hpp"
#include "unac/image.hpp"
#include "unac/session.hpp"
#include "unac/toolclient.hpp"

#include <string>
#include <vector>

namespace unac {

struct MarkerStyle {
  std::vector<Rgb> hues = {
      {230, 25, 75}, {60, 180, 75}, {0, 130, 200}, {245, 130, 48},
      {145, 30, 180}, {70, 200, 200}, {240, 50, 230}, {128, 128, 0},
  };
  int badge_min_px = 14;
  double badge_fraction = 0.03;  // of the smaller image side
  double tint_alpha = 0.35;
  int outline_width = 2;
};

/// Throws std::invalid_argument naming the bad field.
void validate(const MarkerStyle& style);

int badge_diameter(int image_width, int image_height, const MarkerStyle& style);

/// Where region's badge goes: the mask centroid (or bbox centre), clamped so
/// the whole badge stays inside the image when it fits.
Point badge_center(const Region& region, int image_width, int image_height, const MarkerStyle& style);

/// Draws mask tints or bbox outlines for segments, outlines for text boxes,
/// then one numbered badge per region. Pure: same inputs give the same bytes.
/// Zero regions give the original re-encoded as PNG. Throws ImageError when
/// the image does not decode and std::invalid_argument when ids are not
/// dense from 1.
MarkedImage overlay_markers(const ImageBlob& image, const std::vector<Region>& regions,
                            const MarkerStyle& style = {});

struct ParsedNeeds {
  InfoNeeds needs;
  bool kinds_line_found = false;
  bool keyword_fallback_hit = false;
};

/// Reads the last "KINDS:" line; without one, scans for the keyword table
/// (object/item/shape, text/number/label/symbol).
ParsedNeeds parse_info_needs(const std::string& response);

/// One analyze-stage call plus parsing. Degrades to {false, false}.
InfoNeeds analyze_question(Session& session, const Task& task);

/// Keeps regions scoring >= threshold, at most max_regions of them (highest
/// score first, then smaller area, then origin), and numbers the survivors
/// 1..k in (y, x) order of their bbox origins.
std::vector<Region> denoise_regions(const std::vector<Region>& regions, double threshold, int max_regions);

struct VisPromptConfig {
  double threshold = 0.88;
  int max_regions = 12;
  // Pass the analysis TARGETS to /segment instead of running class-agnostic.
  bool segment_prompted = false;
  MarkerStyle style;
};

void validate(const VisPromptConfig& config);

struct VisualPrompt {
  MarkedImage marked;
  InfoNeeds needs;
  std::vector<Region> regions;  // denoised, ids assigned
};

/// analyze -> route -> fetch -> denoise -> overlay. Tool failures and
/// {false,false} needs leave the image unmarked.
VisualPrompt build_visual_prompt(Session& session, const Task& task, tools::ToolClient& tools,
                                 const VisPromptConfig& config = {});

/// Legend as prompt text, one "[i] object" / "[i] text \"...\"" line per entry.
std::string render_legend(const MarkedImage& marked);

}  // namespace unac
