#pragma once

// Core value types shared by every pipeline stage. No I/O, no provider logic.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace unac {

enum class AnswerType { kInteger, kFloat, kText, kMultichoice };
enum class RegionKind { kSegment, kTextBox };
enum class CheckMode { kGradual, kGlobal, kNone };
enum class Stage {
  kAnalyze,
  kAbstractGlobal,
  kAbstractLocal,
  kDecompose,
  kAnswer,
  kCheck,
  kConclude,
  kJudge,
};

std::string_view to_string(AnswerType t);
std::string_view to_string(RegionKind k);
std::string_view to_string(CheckMode m);
std::string_view to_string(Stage s);

std::optional<AnswerType> parse_answer_type(std::string_view s);
std::optional<RegionKind> parse_region_kind(std::string_view s);
std::optional<CheckMode> parse_check_mode(std::string_view s);
std::optional<Stage> parse_stage(std::string_view s);

/// Encoded image bytes (PNG or JPEG) plus their SHA-256 content hash.
/// Copies share the underlying buffer.
class ImageBlob {
 public:
  ImageBlob() = default;
  static ImageBlob from_bytes(std::string bytes);

  const std::string& bytes() const;
  const std::string& digest() const { return digest_; }
  bool empty() const { return !bytes_ || bytes_->empty(); }

  friend bool operator==(const ImageBlob& a, const ImageBlob& b) {
    return a.digest_ == b.digest_;
  }

 private:
  std::shared_ptr<const std::string> bytes_;
  std::string digest_;
};

struct Task {
  std::string id;
  ImageBlob image;
  std::string question;
  AnswerType answer_type = AnswerType::kText;
  std::vector<std::string> choices;
  std::string ground_truth;
  std::set<std::string> category_tags;
  // Number of decimals the benchmark grades float answers at, when stated.
  std::optional<int> decimal_precision;

  friend bool operator==(const Task&, const Task&) = default;
};

/// Empty iff every Task invariant holds. Each message names the failing field.
std::vector<std::string> validate_task(const Task& task);

/// Letter label for choice index i ("A", "B", ...).
std::string choice_letter(std::size_t index);
/// Choice text with a leading "A: " / "A. " / "(A) " label removed.
std::string strip_choice_label(std::string_view choice);
/// Choices as prompt lines "(A) text", one per choice.
std::string render_choices(const Task& task);
/// Index of the choice the ground truth designates, by letter or by text.
std::optional<std::size_t> ground_truth_choice_index(const Task& task);

struct InfoNeeds {
  bool semantic_objects = false;
  bool literal_symbols = false;
  std::string rationale;
  // Object phrases the analysis named, used for prompted segmentation.
  std::vector<std::string> targets;

  friend bool operator==(const InfoNeeds&, const InfoNeeds&) = default;
};

struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  std::int64_t area() const { return std::int64_t{w} * h; }
  bool inside(int width, int height) const {
    return x >= 0 && y >= 0 && w >= 1 && h >= 1 && x + w <= width && y + h <= height;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Row-major bit mask aligned to the full image, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Run-length encoding of a mask: space-separated run lengths over the
/// row-major bits, alternating and starting with a (possibly empty) run of 0s.
std::string encode_mask_rle(const Mask& mask);
/// Throws std::invalid_argument when the runs do not cover width*height bits.
Mask decode_mask_rle(std::string_view rle, int width, int height);

struct Region {
  int id = 0;  // 1-based marker number; 0 until assigned after denoising
  RegionKind kind = RegionKind::kSegment;
  BBox bbox;
  std::shared_ptr<const Mask> mask;
  double stability_score = 0.0;
  std::optional<std::string> text;

  friend bool operator==(const Region& a, const Region& b);
};

/// Violations of the per-region invariants for an image of the given size.
std::vector<std::string> validate_region(const Region& region, int image_width, int image_height);

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct LegendEntry {
  int region_id = 0;
  RegionKind kind = RegionKind::kSegment;
  Point centroid;  // where the numbered badge was drawn
  std::string text;

  friend bool operator==(const LegendEntry&, const LegendEntry&) = default;
};

struct MarkedImage {
  ImageBlob image;
  std::vector<LegendEntry> legend;
  std::string source_digest;

  bool has_markers() const { return !legend.empty(); }
  bool has_region(int id) const;
  friend bool operator==(const MarkedImage&, const MarkedImage&) = default;
};

struct LocalDetail {
  int region_id = 0;
  std::string detail;
  friend bool operator==(const LocalDetail&, const LocalDetail&) = default;
};

struct Abstraction {
  std::string global_description;
  std::vector<LocalDetail> local_details;
  std::vector<int> relevant_region_ids;

  friend bool operator==(const Abstraction&, const Abstraction&) = default;
};

struct CheckSession {
  std::vector<std::string> sub_questions;
  std::vector<std::string> raw_answers;
  std::vector<std::string> checked_answers;
  std::string conclusion;
  CheckMode mode = CheckMode::kGradual;
  // Answer produced by the single review pass in global mode.
  std::string global_revision;

  friend bool operator==(const CheckSession&, const CheckSession&) = default;
};

std::vector<std::string> validate_check_session(const CheckSession& session);

struct TranscriptEntry {
  Stage stage = Stage::kAnalyze;
  std::string provider_id;
  std::string prompt;
  std::vector<std::string> attached_images;  // content hashes
  std::string response;
  std::int64_t wall_time_ms = 0;
  int attempt = 1;     // retries of the same call carry attempt > 1
  bool cached = false;
  std::string error;   // non-empty when this attempt failed

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

struct ToolCall {
  std::string route;  // "/segment" or "/ocr"
  bool ok = false;
  int region_count = 0;
  std::string error;
  std::int64_t wall_time_ms = 0;

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct Transcript {
  std::string task_id;
  std::vector<TranscriptEntry> entries;
  std::vector<ToolCall> tool_calls;
  std::vector<std::string> warnings;

  /// Stage of each logical call (retry attempts collapsed), in order.
  std::vector<Stage> stage_sequence() const;
  std::size_t count(Stage stage) const;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// True when the stage sequence matches
/// analyze abstract_global abstract_local* decompose answer+ check* conclude judge*.
bool stage_order_valid(const Transcript& transcript);

/// Same transcript with every wall_time_ms zeroed, for reproducibility checks.
Transcript without_timings(Transcript transcript);

}  // namespace unac
