#pragma once

// JSON Lines persistence for domain values: one JSON object per line, UTF-8.
// Field layout is documented in docs/formats.md.

#include "unac/domain.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace unac {

void to_json(nlohmann::json& j, const ImageBlob& v);
void from_json(const nlohmann::json& j, ImageBlob& v);
void to_json(nlohmann::json& j, const Task& v);
void from_json(const nlohmann::json& j, Task& v);
void to_json(nlohmann::json& j, const InfoNeeds& v);
void from_json(const nlohmann::json& j, InfoNeeds& v);
void to_json(nlohmann::json& j, const BBox& v);
void from_json(const nlohmann::json& j, BBox& v);
void to_json(nlohmann::json& j, const Region& v);
void from_json(const nlohmann::json& j, Region& v);
void to_json(nlohmann::json& j, const Point& v);
void from_json(const nlohmann::json& j, Point& v);
void to_json(nlohmann::json& j, const LegendEntry& v);
void from_json(const nlohmann::json& j, LegendEntry& v);
void to_json(nlohmann::json& j, const MarkedImage& v);
void from_json(const nlohmann::json& j, MarkedImage& v);
void to_json(nlohmann::json& j, const LocalDetail& v);
void from_json(const nlohmann::json& j, LocalDetail& v);
void to_json(nlohmann::json& j, const Abstraction& v);
void from_json(const nlohmann::json& j, Abstraction& v);
void to_json(nlohmann::json& j, const CheckSession& v);
void from_json(const nlohmann::json& j, CheckSession& v);
void to_json(nlohmann::json& j, const TranscriptEntry& v);
void from_json(const nlohmann::json& j, TranscriptEntry& v);
void to_json(nlohmann::json& j, const ToolCall& v);
void from_json(const nlohmann::json& j, ToolCall& v);
void to_json(nlohmann::json& j, const Transcript& v);
void from_json(const nlohmann::json& j, Transcript& v);

/// One record as a single line (no trailing newline).
template <typename T>
std::string to_record(const T& value) {
  return nlohmann::json(value).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

template <typename T>
T from_record(std::string_view line) {
  return nlohmann::json::parse(line).get<T>();
}

/// Reads every non-blank line of a JSON Lines file. Throws std::runtime_error
/// naming the file and 1-based line on malformed input.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

/// Writes `content` to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace unac
