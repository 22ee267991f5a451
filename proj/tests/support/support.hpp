#pragma once

// Shared test helpers: generated images, in-process stub servers for the chat
// and tool protocols, and scripted provider wiring.

#include "unac/checking.hpp"
#include "unac/domain.hpp"
#include "unac/image.hpp"
#include "unac/provider.hpp"
#include "unac/provider_scripted.hpp"
#include "unac/toolclient.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace unac::testing {

// ---- images

ImageBlob solid_png(int width, int height, Rgb fill = {200, 200, 200});
/// Random blocks and gradients, deterministic in seed.
Raster pattern_raster(int width, int height, std::uint32_t seed);
ImageBlob pattern_png(int width, int height, std::uint32_t seed);
ImageBlob encode_jpeg(const Raster& raster, int quality = 90);

/// Full-image mask that is 1 inside the ellipse inscribed in bbox.
std::shared_ptr<const Mask> ellipse_mask(int width, int height, const BBox& bbox);

// ---- tool server

/// In-process tool server speaking the /segment and /ocr protocol.
class StubToolServer {
 public:
  StubToolServer();
  ~StubToolServer();

  void set_segment(nlohmann::json body, int status = 200);
  void set_ocr(nlohmann::json body, int status = 200);

  std::string endpoint() const;
  int segment_hits() const { return segment_hits_; }
  int ocr_hits() const { return ocr_hits_; }
  nlohmann::json last_segment_request() const;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mu_;
  nlohmann::json segment_body_ = {{"regions", nlohmann::json::array()}};
  nlohmann::json ocr_body_ = {{"regions", nlohmann::json::array()}};
  int segment_status_ = 200;
  int ocr_status_ = 200;
  nlohmann::json last_segment_request_;
  std::atomic<int> segment_hits_{0};
  std::atomic<int> ocr_hits_{0};
};

/// A port on which nothing listens.
std::string closed_endpoint();

// ---- chat server

/// Serves both chat dialects. Each request pops the next scripted status;
/// once the queue is empty every request succeeds with `reply(body)`.
class StubChatServer {
 public:
  explicit StubChatServer(std::function<std::string(const nlohmann::json&)> reply = {});
  ~StubChatServer();

  void push_status(int status, std::string body = "{\"error\":\"scripted\"}");
  std::string endpoint() const;
  int hits() const { return hits_; }
  std::vector<nlohmann::json> bodies() const;
  std::vector<std::map<std::string, std::string>> headers() const;
  std::vector<std::string> paths() const;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::function<std::string(const nlohmann::json&)> reply_;
  mutable std::mutex mu_;
  std::deque<std::pair<int, std::string>> statuses_;
  std::vector<nlohmann::json> bodies_;
  std::vector<std::map<std::string, std::string>> headers_;
  std::vector<std::string> paths_;
  std::atomic<int> hits_{0};
};

// ---- scripted providers

/// One scripted backend per provider id, with retry delays shrunk to 1 ms.
struct ScriptedWorld {
  provider::ProviderSet providers;
  std::map<std::string, std::shared_ptr<provider::ScriptedBackend>> backends;
  provider::StageRoles roles;

  /// Adds provider `id`; roles all point at the first provider added.
  provider::ScriptedBackend& add(const std::string& id);
  std::size_t total_calls() const;
};

provider::ProviderConfig fast_config(const std::string& id, provider::Dialect dialect, const std::string& endpoint);

/// Tool client that returns canned regions without a network.
class FakeToolClient : public tools::ToolClient {
 public:
  std::vector<Region> segments;
  std::vector<Region> text_boxes;
  int calls = 0;
  tools::ToolPlan last_plan;

  tools::FetchResult fetch_regions(const tools::ToolPlan& plan, const ImageBlob& image) override;
};

Region make_region(RegionKind kind, BBox bbox, double score, std::optional<std::string> text = std::nullopt);

// ---- the end-to-end counting scenario

inline constexpr const char* kGoldenQuestion = "Remove every yellow sphere. How many objects remain?";

struct GoldenScenario {
  Task task;
  ScriptedWorld world;
  StubToolServer tools;
  PipelineConfig config;
};

/// Three shapes on a plain background; the tool server reports three
/// segments; the analysis asks for objects; two sub-questions; the first
/// check corrects "4" to "3"; the conclusion answers "2".
std::unique_ptr<GoldenScenario> make_golden_scenario();

}  // namespace unac::testing
