#include "support.hpp"

#include "unac/codec.hpp"

#include <cstdio>
#include <jpeglib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace unac::testing {

using nlohmann::json;

ImageBlob solid_png(int width, int height, Rgb fill) {
  return ImageBlob::from_bytes(encode_png(Raster(width, height, fill)));
}

Raster pattern_raster(int width, int height, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Raster r(width, height);
  const int base_r = static_cast<int>(rng() % 256);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      r.set(x, y, Rgb{static_cast<std::uint8_t>((base_r + x * 3) % 256), static_cast<std::uint8_t>((y * 5) % 256),
                      static_cast<std::uint8_t>((x * y) % 256)});
    }
  }
  const int blocks = 2 + static_cast<int>(rng() % 5);
  for (int b = 0; b < blocks; ++b) {
    const int bw = 1 + static_cast<int>(rng() % std::max(1, width / 2));
    const int bh = 1 + static_cast<int>(rng() % std::max(1, height / 2));
    const int bx = static_cast<int>(rng() % width);
    const int by = static_cast<int>(rng() % height);
    const Rgb c{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
    for (int y = by; y < std::min(height, by + bh); ++y) {
      for (int x = bx; x < std::min(width, bx + bw); ++x) r.set(x, y, c);
    }
  }
  return r;
}

ImageBlob pattern_png(int width, int height, std::uint32_t seed) {
  return ImageBlob::from_bytes(encode_png(pattern_raster(width, height, seed)));
}

ImageBlob encode_jpeg(const Raster& raster, int quality) {
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&cinfo, &buf, &size);
  cinfo.image_width = static_cast<JDIMENSION>(raster.width);
  cinfo.image_height = static_cast<JDIMENSION>(raster.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<unsigned char*>(&raster.rgb[static_cast<std::size_t>(cinfo.next_scanline) * raster.width * 3]);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::string bytes(reinterpret_cast<char*>(buf), size);
  jpeg_destroy_compress(&cinfo);
  std::free(buf);
  return ImageBlob::from_bytes(std::move(bytes));
}

std::shared_ptr<const Mask> ellipse_mask(int width, int height, const BBox& b) {
  Mask m;
  m.width = width;
  m.height = height;
  m.bits.assign(static_cast<std::size_t>(width) * height, 0);
  const double cx = b.x + b.w / 2.0;
  const double cy = b.y + b.h / 2.0;
  const double rx = b.w / 2.0;
  const double ry = b.h / 2.0;
  for (int y = b.y; y < b.y + b.h; ++y) {
    for (int x = b.x; x < b.x + b.w; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) m.bits[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return std::make_shared<const Mask>(std::move(m));
}

namespace {

int start(httplib::Server& server, std::thread& thread) {
  const int port = server.bind_to_any_port("127.0.0.1");
  thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  return port;
}

}  // namespace

StubToolServer::StubToolServer() {
  auto handler = [this](bool segment) {
    return [this, segment](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      if (segment) {
        ++segment_hits_;
        last_segment_request_ = json::parse(req.body, nullptr, false);
      } else {
        ++ocr_hits_;
      }
      res.status = segment ? segment_status_ : ocr_status_;
      res.set_content((segment ? segment_body_ : ocr_body_).dump(), "application/json");
    };
  };
  server_.Post("/segment", handler(true));
  server_.Post("/ocr", handler(false));
  port_ = start(server_, thread_);
}

StubToolServer::~StubToolServer() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

void StubToolServer::set_segment(json body, int status) {
  std::lock_guard lock(mu_);
  segment_body_ = std::move(body);
  segment_status_ = status;
}

void StubToolServer::set_ocr(json body, int status) {
  std::lock_guard lock(mu_);
  ocr_body_ = std::move(body);
  ocr_status_ = status;
}

std::string StubToolServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

json StubToolServer::last_segment_request() const {
  std::lock_guard lock(mu_);
  return last_segment_request_;
}

std::string closed_endpoint() {
  // Bind then close a port so nothing listens on it.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return "http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port));
}

StubChatServer::StubChatServer(std::function<std::string(const json&)> reply) : reply_(std::move(reply)) {
  if (!reply_) reply_ = [](const json&) { return std::string("ok"); };
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ++hits_;
    const auto body = json::parse(req.body, nullptr, false);
    std::pair<int, std::string> scripted{200, {}};
    {
      std::lock_guard lock(mu_);
      bodies_.push_back(body);
      std::map<std::string, std::string> h;
      for (const auto& [k, v] : req.headers) h[k] = v;
      headers_.push_back(std::move(h));
      paths_.push_back(req.path + (req.params.empty() ? "" : "?" + httplib::detail::params_to_query_str(req.params)));
      if (!statuses_.empty()) {
        scripted = statuses_.front();
        statuses_.pop_front();
      }
    }
    if (scripted.first != 200) {
      res.status = scripted.first;
      res.set_content(scripted.second, "application/json");
      return;
    }
    const auto text = reply_(body);
    json out;
    if (req.path.find(":generateContent") != std::string::npos) {
      out = {{"candidates", json::array({{{"content", {{"role", "model"}, {"parts", json::array({{{"text", text}}})}}},
                                          {"finishReason", "STOP"}}})},
             {"usageMetadata", {{"promptTokenCount", 10}, {"candidatesTokenCount", 2}, {"totalTokenCount", 12}}}};
    } else {
      out = {{"choices", json::array({{{"index", 0},
                                       {"message", {{"role", "assistant"}, {"content", text}}},
                                       {"finish_reason", "stop"}}})},
             {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 2}, {"total_tokens", 12}}}};
    }
    res.set_content(out.dump(), "application/json");
  };
  server_.Post(R"(/.*)", handler);
  port_ = start(server_, thread_);
}

StubChatServer::~StubChatServer() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

void StubChatServer::push_status(int status, std::string body) {
  std::lock_guard lock(mu_);
  statuses_.emplace_back(status, std::move(body));
}

std::string StubChatServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

std::vector<json> StubChatServer::bodies() const {
  std::lock_guard lock(mu_);
  return bodies_;
}

std::vector<std::map<std::string, std::string>> StubChatServer::headers() const {
  std::lock_guard lock(mu_);
  return headers_;
}

std::vector<std::string> StubChatServer::paths() const {
  std::lock_guard lock(mu_);
  return paths_;
}

provider::ProviderConfig fast_config(const std::string& id, provider::Dialect dialect, const std::string& endpoint) {
  provider::ProviderConfig c;
  c.provider_id = id;
  c.dialect = dialect;
  c.endpoint = endpoint;
  c.model_name = "test-model";
  c.max_retries = 3;
  c.backoff_base_ms = 1;
  c.backoff_cap_ms = 4;
  c.request_timeout_ms = 5000;
  return c;
}

provider::ScriptedBackend& ScriptedWorld::add(const std::string& id) {
  auto backend = std::make_shared<provider::ScriptedBackend>();
  providers.add(std::make_shared<provider::Provider>(fast_config(id, provider::Dialect::kScripted, "-"), backend));
  backends[id] = backend;
  if (roles.abstract.empty()) {
    roles.abstract = id;
    roles.check = id;
    roles.conclude = id;
  }
  return *backend;
}

std::size_t ScriptedWorld::total_calls() const {
  std::size_t n = 0;
  for (const auto& [_, b] : backends) n += b->calls();
  return n;
}

tools::FetchResult FakeToolClient::fetch_regions(const tools::ToolPlan& plan, const ImageBlob&) {
  if (!plan.any()) throw tools::ToolError(tools::ToolErrorKind::kPrecondition, "empty plan");
  ++calls;
  last_plan = plan;
  tools::FetchResult out;
  if (plan.run_segmentation) {
    out.regions.insert(out.regions.end(), segments.begin(), segments.end());
    out.calls.push_back(ToolCall{"/segment", true, static_cast<int>(segments.size()), "", 0});
  }
  if (plan.run_ocr) {
    out.regions.insert(out.regions.end(), text_boxes.begin(), text_boxes.end());
    out.calls.push_back(ToolCall{"/ocr", true, static_cast<int>(text_boxes.size()), "", 0});
  }
  return out;
}

Region make_region(RegionKind kind, BBox bbox, double score, std::optional<std::string> text) {
  Region r;
  r.kind = kind;
  r.bbox = bbox;
  r.stability_score = score;
  r.text = std::move(text);
  return r;
}

std::unique_ptr<GoldenScenario> make_golden_scenario() {
  auto s = std::make_unique<GoldenScenario>();
  constexpr int kW = 120;
  constexpr int kH = 80;
  Raster img(kW, kH, Rgb{128, 128, 128});
  const BBox sphere{10, 30, 24, 24};
  const BBox cube{48, 20, 26, 26};
  const BBox cylinder{86, 28, 22, 30};
  auto paint = [&](const BBox& b, Rgb c) {
    for (int y = b.y; y < b.y + b.h; ++y) {
      for (int x = b.x; x < b.x + b.w; ++x) img.set(x, y, c);
    }
  };
  paint(sphere, {230, 210, 40});
  paint(cube, {200, 40, 40});
  paint(cylinder, {40, 80, 200});

  s->task.id = "golden-1";
  s->task.image = ImageBlob::from_bytes(encode_png(img));
  s->task.question = kGoldenQuestion;
  s->task.answer_type = AnswerType::kInteger;
  s->task.ground_truth = "2";
  s->task.category_tags = {"VQA", "ARI"};

  auto region_json = [&](const BBox& b, double score) {
    return json{{"bbox", {b.x, b.y, b.w, b.h}}, {"mask_rle", encode_mask_rle(*ellipse_mask(kW, kH, b))}, {"score", score}};
  };
  s->tools.set_segment(json{{"regions",
                             {region_json(cylinder, 0.91), region_json(sphere, 0.95), region_json(cube, 0.93),
                              region_json(BBox{0, 0, 6, 6}, 0.30)}}});

  auto& b = s->world.add("mock");
  b.add_rule({"KINDS: objects|symbols|both|none"},
             "Each object has to be recognised and counted, so the objects must be told apart.\n"
             "TARGETS: sphere, cube, cylinder\nKINDS: objects");
  b.add_rule({"Describe the image so that"},
             "Three objects on a gray floor: a yellow sphere (marker 1), a red cube (marker 2) and a blue "
             "cylinder (marker 3).");
  b.add_rule({"RELEVANT: <comma-separated"},
             "RELEVANT: 1,2,3\nDETAIL 1: a small yellow sphere\nDETAIL 2: a red cube\nDETAIL 3: a blue cylinder");
  b.add_rule({"Break the question into"},
             "Q1: How many objects are in the image?\n"
             "Q2: How many objects remain after removing the yellow sphere?");
  b.add_rule({"Answer the next sub-question", "Sub-question: How many objects are in the image?"}, "4");
  b.add_rule({"Answer the next sub-question", "Sub-question: How many objects remain"}, "2");
  b.add_rule({"Candidate answer: 4"}, "There are only three shapes when looking again.\nCHECKED: 3");
  b.add_rule({"Candidate answer: 2", "A1: 3"}, "Three minus the sphere is two.\nCHECKED: 2");
  b.add_rule({"Infer the final answer"}, "There are three objects and one yellow sphere, so two remain.\nFINAL: 2");

  s->config.mode = CheckMode::kGradual;
  return s;
}

}  // namespace unac::testing
