#pragma once

// Client for the segmentation/OCR tool server.
//
// Wire protocol (JSON over HTTP):
//   POST /segment, POST /ocr
//   request  {"image": "<base64>", "params": {...}}
//   response {"regions": [{"bbox": [x, y, w, h], "mask_rle": "<runs>",
//                          "score": 0.93, "text": "..."}]}
// mask_rle is optional and uses encode_mask_rle's format over the full image.

#include "unac/domain.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace unac::tools {

struct ToolPlan {
  bool run_segmentation = false;
  bool run_ocr = false;
  // Prompted segmentation: object names sent to /segment as "text_prompts".
  // Empty means class-agnostic.
  std::vector<std::string> text_prompts;

  bool any() const { return run_segmentation || run_ocr; }
  friend bool operator==(const ToolPlan&, const ToolPlan&) = default;
};

/// Segmentation for semantic objects, OCR for literal symbols. Class-agnostic.
ToolPlan plan_from(const InfoNeeds& needs);

enum class ToolErrorKind { kPrecondition, kUnreachable, kBadPayload };

class ToolError : public std::runtime_error {
 public:
  ToolError(ToolErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ToolErrorKind kind() const { return kind_; }

  // Route calls made before the failure, for the transcript.
  std::vector<ToolCall> calls;

 private:
  ToolErrorKind kind_;
};

struct FetchResult {
  std::vector<Region> regions;       // ids all 0
  std::vector<ToolCall> calls;       // one per route hit
  std::vector<std::string> warnings; // dropped regions
};

class ToolClient {
 public:
  virtual ~ToolClient() = default;
  /// Throws ToolError. Segments come first, then text boxes, each sorted by
  /// bbox origin (y, x).
  virtual FetchResult fetch_regions(const ToolPlan& plan, const ImageBlob& image) = 0;
};

struct HttpToolOptions {
  std::string endpoint;  // http://host:port
  int timeout_ms = 30000;
  // Extra fields sent as "params" to each route.
  nlohmann::json segment_params = nlohmann::json::object();
  nlohmann::json ocr_params = nlohmann::json::object();
};

class HttpToolClient : public ToolClient {
 public:
  explicit HttpToolClient(HttpToolOptions options);
  FetchResult fetch_regions(const ToolPlan& plan, const ImageBlob& image) override;

 private:
  HttpToolOptions options_;
};

/// Used when no tool server is configured: every fetch is tool_unreachable.
class NullToolClient : public ToolClient {
 public:
  FetchResult fetch_regions(const ToolPlan& plan, const ImageBlob& image) override;
};

/// Converts one /segment or /ocr response body into Regions. Throws
/// ToolError(kBadPayload) when the body does not follow the schema; drops
/// individual regions that break a Region invariant, appending a warning.
std::vector<Region> parse_regions(const nlohmann::json& body, RegionKind kind, int image_width, int image_height,
                                  std::vector<std::string>* warnings);

/// Sorts by bbox origin (y, x), stable.
void sort_by_origin(std::vector<Region>& regions);

}  // namespace unac::tools
