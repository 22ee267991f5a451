#include "unac/domain.hpp"

#include "unac/codec.hpp"
#include "unac/image.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace unac {
namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::pair<std::string_view, Enum> (&table)[N], std::string_view s) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

constexpr std::pair<std::string_view, AnswerType> kAnswerTypes[] = {
    {"integer", AnswerType::kInteger},
    {"float", AnswerType::kFloat},
    {"text", AnswerType::kText},
    {"multichoice", AnswerType::kMultichoice},
};
constexpr std::pair<std::string_view, RegionKind> kRegionKinds[] = {
    {"segment", RegionKind::kSegment},
    {"text_box", RegionKind::kTextBox},
};
constexpr std::pair<std::string_view, CheckMode> kCheckModes[] = {
    {"gradual", CheckMode::kGradual},
    {"global", CheckMode::kGlobal},
    {"none", CheckMode::kNone},
};
constexpr std::pair<std::string_view, Stage> kStages[] = {
    {"analyze", Stage::kAnalyze},
    {"abstract_global", Stage::kAbstractGlobal},
    {"abstract_local", Stage::kAbstractLocal},
    {"decompose", Stage::kDecompose},
    {"answer", Stage::kAnswer},
    {"check", Stage::kCheck},
    {"conclude", Stage::kConclude},
    {"judge", Stage::kJudge},
};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::pair<std::string_view, Enum> (&table)[N], Enum v) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string_view to_string(AnswerType t) { return name_of(kAnswerTypes, t); }
std::string_view to_string(RegionKind k) { return name_of(kRegionKinds, k); }
std::string_view to_string(CheckMode m) { return name_of(kCheckModes, m); }
std::string_view to_string(Stage s) { return name_of(kStages, s); }

std::optional<AnswerType> parse_answer_type(std::string_view s) { return lookup(kAnswerTypes, s); }
std::optional<RegionKind> parse_region_kind(std::string_view s) { return lookup(kRegionKinds, s); }
std::optional<CheckMode> parse_check_mode(std::string_view s) { return lookup(kCheckModes, s); }
std::optional<Stage> parse_stage(std::string_view s) { return lookup(kStages, s); }

ImageBlob ImageBlob::from_bytes(std::string bytes) {
  ImageBlob blob;
  blob.digest_ = sha256_hex(bytes);
  blob.bytes_ = std::make_shared<const std::string>(std::move(bytes));
  return blob;
}

const std::string& ImageBlob::bytes() const {
  static const std::string kEmpty;
  return bytes_ ? *bytes_ : kEmpty;
}

std::string choice_letter(std::size_t index) {
  return std::string(1, static_cast<char>('A' + index));
}

std::string strip_choice_label(std::string_view choice) {
  const std::string t = trim(choice);
  // "(A) text"
  if (t.size() >= 3 && t[0] == '(' && std::isupper(static_cast<unsigned char>(t[1])) && t[2] == ')') {
    return trim(std::string_view(t).substr(3));
  }
  // "A: text" / "A. text" / "A) text"
  if (t.size() >= 2 && std::isupper(static_cast<unsigned char>(t[0])) &&
      (t[1] == ':' || t[1] == '.' || t[1] == ')') && (t.size() == 2 || t[2] == ' ')) {
    return trim(std::string_view(t).substr(2));
  }
  return t;
}

std::string render_choices(const Task& task) {
  std::string out;
  for (std::size_t i = 0; i < task.choices.size(); ++i) {
    if (i) out += '\n';
    out += "(" + choice_letter(i) + ") " + strip_choice_label(task.choices[i]);
  }
  return out;
}

std::optional<std::size_t> ground_truth_choice_index(const Task& task) {
  const std::string gt = trim(task.ground_truth);
  if (gt.size() == 1 && std::isalpha(static_cast<unsigned char>(gt[0]))) {
    const auto idx = static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(gt[0])) - 'A');
    if (idx < task.choices.size()) return idx;
  }
  for (std::size_t i = 0; i < task.choices.size(); ++i) {
    if (trim(task.choices[i]) == gt || strip_choice_label(task.choices[i]) == gt) return i;
  }
  // Case-insensitive fallback for labels like "b".
  for (std::size_t i = 0; i < task.choices.size(); ++i) {
    if (upper(strip_choice_label(task.choices[i])) == upper(gt)) return i;
  }
  return std::nullopt;
}

std::vector<std::string> validate_task(const Task& task) {
  std::vector<std::string> violations;
  if (task.id.empty()) violations.emplace_back("id empty");
  if (trim(task.question).empty()) violations.emplace_back("question empty");
  if (task.answer_type == AnswerType::kMultichoice) {
    if (task.choices.empty()) {
      violations.emplace_back("choices empty for multichoice");
    } else if (!ground_truth_choice_index(task)) {
      violations.emplace_back("ground_truth not among choices");
    }
  }
  if (task.decimal_precision && *task.decimal_precision < 0) {
    violations.emplace_back("decimal_precision negative");
  }
  if (task.image.empty()) {
    violations.emplace_back("image empty");
  } else if (!decode_image(task.image.bytes())) {
    violations.emplace_back("image undecodable");
  }
  return violations;
}

std::string encode_mask_rle(const Mask& mask) {
  std::string out;
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (std::uint8_t bit : mask.bits) {
    const std::uint8_t b = bit ? 1 : 0;
    if (b != current) {
      out += std::to_string(run);
      out += ' ';
      run = 0;
      current = b;
    }
    ++run;
  }
  out += std::to_string(run);
  return out;
}

Mask decode_mask_rle(std::string_view rle, int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("mask dimensions must be positive");
  Mask mask{width, height, {}};
  const auto total = static_cast<std::size_t>(width) * height;
  mask.bits.reserve(total);
  std::uint8_t current = 0;
  std::size_t pos = 0;
  while (pos < rle.size()) {
    while (pos < rle.size() && rle[pos] == ' ') ++pos;
    if (pos >= rle.size()) break;
    std::size_t run = 0;
    const auto [ptr, ec] = std::from_chars(rle.data() + pos, rle.data() + rle.size(), run);
    if (ec != std::errc{}) throw std::invalid_argument("mask rle: expected a run length");
    pos = static_cast<std::size_t>(ptr - rle.data());
    if (pos < rle.size() && rle[pos] != ' ') throw std::invalid_argument("mask rle: bad separator");
    if (mask.bits.size() + run > total) throw std::invalid_argument("mask rle: runs exceed mask size");
    mask.bits.insert(mask.bits.end(), run, current);
    current ^= 1;
  }
  if (mask.bits.size() != total) throw std::invalid_argument("mask rle: runs do not cover the mask");
  return mask;
}

bool operator==(const Region& a, const Region& b) {
  const bool masks_equal = (!a.mask && !b.mask) || (a.mask && b.mask && *a.mask == *b.mask);
  return a.id == b.id && a.kind == b.kind && a.bbox == b.bbox && masks_equal &&
         a.stability_score == b.stability_score && a.text == b.text;
}

std::vector<std::string> validate_region(const Region& region, int image_width, int image_height) {
  std::vector<std::string> violations;
  if (!region.bbox.inside(image_width, image_height)) violations.emplace_back("bbox outside image bounds");
  if (region.kind == RegionKind::kTextBox && (!region.text || region.text->empty())) {
    violations.emplace_back("text missing for text_box");
  }
  if (!(region.stability_score >= 0.0 && region.stability_score <= 1.0)) {
    violations.emplace_back("stability_score outside [0,1]");
  }
  if (region.mask && (region.mask->width != image_width || region.mask->height != image_height)) {
    violations.emplace_back("mask not aligned to image dimensions");
  }
  return violations;
}

bool MarkedImage::has_region(int id) const {
  return std::any_of(legend.begin(), legend.end(), [id](const LegendEntry& e) { return e.region_id == id; });
}

std::vector<std::string> validate_check_session(const CheckSession& s) {
  std::vector<std::string> violations;
  if (s.sub_questions.size() != s.raw_answers.size()) {
    violations.emplace_back("raw_answers not aligned with sub_questions");
  }
  if (s.mode == CheckMode::kGradual && s.checked_answers.size() != s.sub_questions.size()) {
    violations.emplace_back("checked_answers not aligned with sub_questions");
  }
  if (s.mode != CheckMode::kGradual && !s.checked_answers.empty()) {
    violations.emplace_back("checked_answers must be empty outside gradual mode");
  }
  return violations;
}

std::vector<Stage> Transcript::stage_sequence() const {
  std::vector<Stage> seq;
  for (const auto& e : entries) {
    if (e.attempt == 1) seq.push_back(e.stage);
  }
  return seq;
}

std::size_t Transcript::count(Stage stage) const {
  const auto seq = stage_sequence();
  return static_cast<std::size_t>(std::count(seq.begin(), seq.end(), stage));
}

bool stage_order_valid(const Transcript& transcript) {
  const auto seq = transcript.stage_sequence();
  std::size_t i = 0;
  auto take = [&](Stage s) {
    if (i < seq.size() && seq[i] == s) {
      ++i;
      return true;
    }
    return false;
  };
  auto take_many = [&](Stage s) {
    std::size_t n = 0;
    while (take(s)) ++n;
    return n;
  };
  if (!take(Stage::kAnalyze)) return false;
  if (!take(Stage::kAbstractGlobal)) return false;
  take_many(Stage::kAbstractLocal);
  if (!take(Stage::kDecompose)) return false;
  if (take_many(Stage::kAnswer) == 0) return false;
  take_many(Stage::kCheck);
  if (!take(Stage::kConclude)) return false;
  take_many(Stage::kJudge);
  return i == seq.size();
}

Transcript without_timings(Transcript transcript) {
  for (auto& e : transcript.entries) e.wall_time_ms = 0;
  for (auto& t : transcript.tool_calls) t.wall_time_ms = 0;
  return transcript;
}

}  // namespace unac
