#include "unac/toolclient.hpp"

#include "unac/codec.hpp"
#include "unac/domain_io.hpp"
#include "unac/image.hpp"
#include "unac/provider_http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <future>

namespace unac::tools {
namespace {

using nlohmann::json;

struct RouteResult {
  std::vector<Region> regions;
  ToolCall call;
  std::vector<std::string> warnings;
  std::optional<ToolError> error;
};

RouteResult call_route(const HttpToolOptions& options, const std::string& route, const json& params,
                       RegionKind kind, const std::string& image_b64, int width, int height) {
  RouteResult out;
  out.call.route = route;
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    out.call.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    const auto url = provider::parse_url(options.endpoint);
    httplib::Client cli(url.origin);
    const auto timeout = std::chrono::milliseconds(options.timeout_ms);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    const json body{{"image", image_b64}, {"params", params}};
    auto res = cli.Post(url.path + route, body.dump(), "application/json");
    if (!res) {
      throw ToolError(ToolErrorKind::kUnreachable, route + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ToolError(res->status >= 500 ? ToolErrorKind::kUnreachable : ToolErrorKind::kBadPayload,
                      route + ": HTTP " + std::to_string(res->status));
    }
    auto parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw ToolError(ToolErrorKind::kBadPayload, route + ": response is not JSON");
    out.regions = parse_regions(parsed, kind, width, height, &out.warnings);
    out.call.ok = true;
    out.call.region_count = static_cast<int>(out.regions.size());
  } catch (const ToolError& e) {
    out.call.error = e.what();
    out.error = e;
  } catch (const provider::ProviderError& e) {
    out.call.error = e.what();
    out.error = ToolError(ToolErrorKind::kUnreachable, e.what());
  }
  finish();
  return out;
}

}  // namespace

ToolPlan plan_from(const InfoNeeds& needs) { return ToolPlan{needs.semantic_objects, needs.literal_symbols, {}}; }

void sort_by_origin(std::vector<Region>& regions) {
  std::stable_sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    return std::tie(a.bbox.y, a.bbox.x) < std::tie(b.bbox.y, b.bbox.x);
  });
}

std::vector<Region> parse_regions(const json& body, RegionKind kind, int image_width, int image_height,
                                  std::vector<std::string>* warnings) {
  if (!body.is_object() || !body.contains("regions") || !body["regions"].is_array()) {
    throw ToolError(ToolErrorKind::kBadPayload, "response has no regions array");
  }
  std::vector<Region> out;
  std::size_t index = 0;
  for (const auto& r : body["regions"]) {
    const auto where = std::string(to_string(kind)) + " region " + std::to_string(index++);
    if (!r.is_object() || !r.contains("bbox") || !r.contains("score") || !r["score"].is_number()) {
      throw ToolError(ToolErrorKind::kBadPayload, where + ": missing bbox or score");
    }
    Region region;
    region.kind = kind;
    try {
      region.bbox = r["bbox"].get<BBox>();
    } catch (const std::exception& e) {
      throw ToolError(ToolErrorKind::kBadPayload, where + ": " + e.what());
    }
    region.stability_score = r["score"].get<double>();
    if (r.contains("text") && r["text"].is_string()) region.text = r["text"].get<std::string>();
    if (r.contains("mask_rle") && r["mask_rle"].is_string()) {
      try {
        region.mask = std::make_shared<const Mask>(
            decode_mask_rle(r["mask_rle"].get<std::string>(), image_width, image_height));
      } catch (const std::invalid_argument& e) {
        const auto msg = where + " dropped: " + e.what();
        spdlog::warn("{}", msg);
        if (warnings) warnings->push_back(msg);
        continue;
      }
    }
    const auto violations = validate_region(region, image_width, image_height);
    if (!violations.empty()) {
      const auto msg = where + " dropped: " + violations.front();
      spdlog::warn("{}", msg);
      if (warnings) warnings->push_back(msg);
      continue;
    }
    out.push_back(std::move(region));
  }
  sort_by_origin(out);
  return out;
}

HttpToolClient::HttpToolClient(HttpToolOptions options) : options_(std::move(options)) {}

FetchResult HttpToolClient::fetch_regions(const ToolPlan& plan, const ImageBlob& image) {
  if (!plan.any()) throw ToolError(ToolErrorKind::kPrecondition, "tool plan requests neither segmentation nor OCR");
  const auto raster = decode_image(image.bytes());
  if (!raster) throw ToolError(ToolErrorKind::kPrecondition, "image undecodable");
  const auto b64 = base64_encode(image.bytes());
  const int w = raster->width;
  const int h = raster->height;

  json seg_params = options_.segment_params;
  if (!plan.text_prompts.empty()) seg_params["text_prompts"] = plan.text_prompts;

  std::future<RouteResult> seg;
  std::future<RouteResult> ocr;
  if (plan.run_segmentation) {
    seg = std::async(std::launch::async, call_route, std::cref(options_), std::string("/segment"),
                     std::cref(seg_params), RegionKind::kSegment, std::cref(b64), w, h);
  }
  if (plan.run_ocr) {
    ocr = std::async(std::launch::async, call_route, std::cref(options_), std::string("/ocr"),
                     std::cref(options_.ocr_params), RegionKind::kTextBox, std::cref(b64), w, h);
  }

  FetchResult out;
  std::optional<ToolError> first_error;
  for (auto* f : {&seg, &ocr}) {
    if (!f->valid()) continue;
    auto r = f->get();
    out.calls.push_back(r.call);
    out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
    if (r.error && !first_error) first_error = r.error;
    out.regions.insert(out.regions.end(), std::make_move_iterator(r.regions.begin()),
                       std::make_move_iterator(r.regions.end()));
  }
  if (first_error) {
    first_error->calls = out.calls;
    throw *first_error;
  }
  return out;
}

FetchResult NullToolClient::fetch_regions(const ToolPlan& plan, const ImageBlob&) {
  if (!plan.any()) throw ToolError(ToolErrorKind::kPrecondition, "tool plan requests neither segmentation nor OCR");
  throw ToolError(ToolErrorKind::kUnreachable, "no tool server configured");
}

}  // namespace unac::tools
