#include "unac/domain_io.hpp"

#include "unac/codec.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace unac {

using nlohmann::json;

namespace {

template <typename Enum>
Enum enum_from(const json& j, std::optional<Enum> (*parse)(std::string_view), const char* what) {
  const auto s = j.get<std::string>();
  if (auto v = parse(s)) return *v;
  throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

}  // namespace

void to_json(json& j, const ImageBlob& v) {
  j = json{{"digest", v.digest()}, {"base64", base64_encode(v.bytes())}};
}

void from_json(const json& j, ImageBlob& v) {
  v = ImageBlob::from_bytes(base64_decode(j.at("base64").get<std::string>()));
  if (j.contains("digest") && j.at("digest").get<std::string>() != v.digest()) {
    throw std::invalid_argument("image digest does not match its bytes");
  }
}

void to_json(json& j, const Task& v) {
  j = json{{"id", v.id},
           {"image", v.image},
           {"question", v.question},
           {"answer_type", to_string(v.answer_type)},
           {"choices", v.choices},
           {"ground_truth", v.ground_truth},
           {"category_tags", v.category_tags}};
  if (v.decimal_precision) j["decimal_precision"] = *v.decimal_precision;
}

void from_json(const json& j, Task& v) {
  v.id = j.at("id").get<std::string>();
  v.image = j.at("image").get<ImageBlob>();
  v.question = j.at("question").get<std::string>();
  v.answer_type = enum_from(j.at("answer_type"), parse_answer_type, "answer_type");
  v.choices = j.value("choices", std::vector<std::string>{});
  v.ground_truth = j.value("ground_truth", std::string{});
  v.category_tags = j.value("category_tags", std::set<std::string>{});
  v.decimal_precision.reset();
  if (j.contains("decimal_precision") && !j["decimal_precision"].is_null()) {
    v.decimal_precision = j["decimal_precision"].get<int>();
  }
}

void to_json(json& j, const InfoNeeds& v) {
  j = json{{"semantic_objects", v.semantic_objects},
           {"literal_symbols", v.literal_symbols},
           {"rationale", v.rationale},
           {"targets", v.targets}};
}

void from_json(const json& j, InfoNeeds& v) {
  v.semantic_objects = j.at("semantic_objects").get<bool>();
  v.literal_symbols = j.at("literal_symbols").get<bool>();
  v.rationale = j.value("rationale", std::string{});
  v.targets = j.value("targets", std::vector<std::string>{});
}

void to_json(json& j, const BBox& v) { j = json::array({v.x, v.y, v.w, v.h}); }

void from_json(const json& j, BBox& v) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("bbox must be [x, y, w, h]");
  v = BBox{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

void to_json(json& j, const Region& v) {
  j = json{{"id", v.id}, {"kind", to_string(v.kind)}, {"bbox", v.bbox}, {"stability_score", v.stability_score}};
  if (v.mask) {
    j["mask"] = json{{"width", v.mask->width}, {"height", v.mask->height}, {"rle", encode_mask_rle(*v.mask)}};
  }
  if (v.text) j["text"] = *v.text;
}

void from_json(const json& j, Region& v) {
  v.id = j.at("id").get<int>();
  v.kind = enum_from(j.at("kind"), parse_region_kind, "region kind");
  v.bbox = j.at("bbox").get<BBox>();
  v.stability_score = j.at("stability_score").get<double>();
  v.mask.reset();
  if (j.contains("mask") && !j["mask"].is_null()) {
    const auto& m = j["mask"];
    v.mask = std::make_shared<const Mask>(
        decode_mask_rle(m.at("rle").get<std::string>(), m.at("width").get<int>(), m.at("height").get<int>()));
  }
  v.text.reset();
  if (j.contains("text") && !j["text"].is_null()) v.text = j["text"].get<std::string>();
}

void to_json(json& j, const Point& v) { j = json::array({v.x, v.y}); }

void from_json(const json& j, Point& v) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be [x, y]");
  v = Point{j[0].get<int>(), j[1].get<int>()};
}

void to_json(json& j, const LegendEntry& v) {
  j = json{{"region_id", v.region_id}, {"kind", to_string(v.kind)}, {"centroid", v.centroid}, {"text", v.text}};
}

void from_json(const json& j, LegendEntry& v) {
  v.region_id = j.at("region_id").get<int>();
  v.kind = enum_from(j.at("kind"), parse_region_kind, "region kind");
  v.centroid = j.at("centroid").get<Point>();
  v.text = j.value("text", std::string{});
}

void to_json(json& j, const MarkedImage& v) {
  j = json{{"image", v.image}, {"legend", v.legend}, {"source_digest", v.source_digest}};
}

void from_json(const json& j, MarkedImage& v) {
  v.image = j.at("image").get<ImageBlob>();
  v.legend = j.at("legend").get<std::vector<LegendEntry>>();
  v.source_digest = j.at("source_digest").get<std::string>();
}

void to_json(json& j, const LocalDetail& v) { j = json{{"region_id", v.region_id}, {"detail", v.detail}}; }

void from_json(const json& j, LocalDetail& v) {
  v.region_id = j.at("region_id").get<int>();
  v.detail = j.at("detail").get<std::string>();
}

void to_json(json& j, const Abstraction& v) {
  j = json{{"global_description", v.global_description},
           {"local_details", v.local_details},
           {"relevant_region_ids", v.relevant_region_ids}};
}

void from_json(const json& j, Abstraction& v) {
  v.global_description = j.at("global_description").get<std::string>();
  v.local_details = j.at("local_details").get<std::vector<LocalDetail>>();
  v.relevant_region_ids = j.at("relevant_region_ids").get<std::vector<int>>();
}

void to_json(json& j, const CheckSession& v) {
  j = json{{"sub_questions", v.sub_questions},
           {"raw_answers", v.raw_answers},
           {"checked_answers", v.checked_answers},
           {"conclusion", v.conclusion},
           {"mode", to_string(v.mode)},
           {"global_revision", v.global_revision}};
}

void from_json(const json& j, CheckSession& v) {
  v.sub_questions = j.at("sub_questions").get<std::vector<std::string>>();
  v.raw_answers = j.at("raw_answers").get<std::vector<std::string>>();
  v.checked_answers = j.at("checked_answers").get<std::vector<std::string>>();
  v.conclusion = j.at("conclusion").get<std::string>();
  v.mode = enum_from(j.at("mode"), parse_check_mode, "check mode");
  v.global_revision = j.value("global_revision", std::string{});
}

void to_json(json& j, const TranscriptEntry& v) {
  j = json{{"stage", to_string(v.stage)},
           {"provider_id", v.provider_id},
           {"prompt", v.prompt},
           {"attached_images", v.attached_images},
           {"response", v.response},
           {"wall_time_ms", v.wall_time_ms},
           {"attempt", v.attempt},
           {"cached", v.cached},
           {"error", v.error}};
}

void from_json(const json& j, TranscriptEntry& v) {
  v.stage = enum_from(j.at("stage"), parse_stage, "stage");
  v.provider_id = j.at("provider_id").get<std::string>();
  v.prompt = j.at("prompt").get<std::string>();
  v.attached_images = j.at("attached_images").get<std::vector<std::string>>();
  v.response = j.at("response").get<std::string>();
  v.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  v.attempt = j.value("attempt", 1);
  v.cached = j.value("cached", false);
  v.error = j.value("error", std::string{});
}

void to_json(json& j, const ToolCall& v) {
  j = json{{"route", v.route},
           {"ok", v.ok},
           {"region_count", v.region_count},
           {"error", v.error},
           {"wall_time_ms", v.wall_time_ms}};
}

void from_json(const json& j, ToolCall& v) {
  v.route = j.at("route").get<std::string>();
  v.ok = j.at("ok").get<bool>();
  v.region_count = j.at("region_count").get<int>();
  v.error = j.value("error", std::string{});
  v.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
}

void to_json(json& j, const Transcript& v) {
  j = json{{"task_id", v.task_id}, {"entries", v.entries}, {"tool_calls", v.tool_calls}, {"warnings", v.warnings}};
}

void from_json(const json& j, Transcript& v) {
  v.task_id = j.value("task_id", std::string{});
  v.entries = j.at("entries").get<std::vector<TranscriptEntry>>();
  v.tool_calls = j.value("tool_calls", std::vector<ToolCall>{});
  v.warnings = j.value("warnings", std::vector<std::string>{});
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::string content;
  for (const auto& r : records) {
    content += r.dump(-1, ' ', false, json::error_handler_t::replace);
    content += '\n';
  }
  write_file_atomic(path, content);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  thread_local std::mt19937_64 rng(std::random_device{}());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(rng());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace unac
