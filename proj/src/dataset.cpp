#include "unac/dataset.hpp"

#include "unac/codec.hpp"
#include "unac/domain_io.hpp"
#include "unac/text.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace unac {
namespace {

using nlohmann::json;

struct RecordError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string str_field(const json& r, const char* key) {
  if (!r.contains(key) || r[key].is_null()) return {};
  if (r[key].is_string()) return r[key].get<std::string>();
  if (r[key].is_number_integer()) return std::to_string(r[key].get<long long>());
  return r[key].dump();
}

ImageBlob load_image(const json& r, const char* key, const std::filesystem::path& base) {
  const auto v = str_field(r, key);
  if (v.empty()) throw RecordError(std::string(key) + " missing");
  if (v.rfind("data:", 0) == 0) {
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw RecordError(std::string(key) + ": bad data URL");
    return ImageBlob::from_bytes(base64_decode(std::string_view(v).substr(comma + 1)));
  }
  const auto path = base / v;
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) return ImageBlob::from_bytes(read_file(path));
  try {
    return ImageBlob::from_bytes(base64_decode(v));
  } catch (const std::invalid_argument&) {
    throw RecordError(std::string(key) + ": no such file " + path.string());
  }
}

// Whole-file JSON (array or id-keyed object) or JSON Lines.
std::vector<std::pair<std::string, json>> read_records(const std::filesystem::path& path) {
  std::string content;
  try {
    content = read_file(path);
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::kIo, e.what());
  }
  std::vector<std::pair<std::string, json>> out;
  if (text::trim(content).empty()) return out;

  auto whole = json::parse(content, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) {
      for (auto& r : whole) out.emplace_back("", std::move(r));
      return out;
    }
    if (whole.is_object() && !whole.contains("question")) {
      for (auto& [k, v] : whole.items()) out.emplace_back(k, v);
      return out;
    }
    if (whole.is_object()) {
      out.emplace_back("", std::move(whole));
      return out;
    }
    throw DatasetError(DatasetError::Kind::kFormat, path.string() + ": top-level JSON must be an array or object");
  }
  try {
    for (auto& r : read_jsonl(path)) out.emplace_back("", std::move(r));
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::kFormat, e.what());
  }
  return out;
}

AnswerType guess_open_type(const std::string& answer) {
  const auto t = text::trim(answer);
  if (t.empty()) return AnswerType::kText;
  std::size_t pos = 0;
  try {
    const double v = std::stod(t, &pos);
    if (pos != t.size()) return AnswerType::kText;
    return t.find('.') == std::string::npos && std::floor(v) == v ? AnswerType::kInteger : AnswerType::kFloat;
  } catch (const std::exception&) {
    return AnswerType::kText;
  }
}

Task from_mathvista(const std::string& key, const json& r, const std::filesystem::path& base) {
  Task t;
  t.id = str_field(r, "pid");
  if (t.id.empty()) t.id = key;
  t.question = str_field(r, "question");
  if (!r.contains("answer") || r["answer"].is_null()) throw RecordError("ground_truth missing");
  t.ground_truth = str_field(r, "answer");
  t.image = load_image(r, "image", base);
  if (r.contains("choices") && r["choices"].is_array()) t.choices = r["choices"].get<std::vector<std::string>>();

  const auto qtype = str_field(r, "question_type");
  const auto atype = str_field(r, "answer_type");
  if (qtype == "multi_choice" || !t.choices.empty()) {
    t.answer_type = AnswerType::kMultichoice;
  } else if (auto a = parse_answer_type(atype)) {
    t.answer_type = *a;
  } else {
    t.answer_type = AnswerType::kText;  // "list" and unknown types
  }
  if (r.contains("precision") && r["precision"].is_number()) {
    t.decimal_precision = static_cast<int>(std::lround(r["precision"].get<double>()));
  }

  auto add_tag = [&](const std::string& name) {
    if (auto tag = mathvista_tag(name)) t.category_tags.insert(*tag);
  };
  if (r.contains("metadata") && r["metadata"].is_object()) {
    const auto& m = r["metadata"];
    if (m.contains("task") && m["task"].is_string()) add_tag(m["task"].get<std::string>());
    if (m.contains("skills") && m["skills"].is_array()) {
      for (const auto& s : m["skills"]) {
        if (s.is_string()) add_tag(s.get<std::string>());
      }
    }
  }
  if (r.contains("category_tags") && r["category_tags"].is_array()) {
    for (const auto& s : r["category_tags"]) t.category_tags.insert(s.get<std::string>());
  }
  return t;
}

Task from_mmvet(const std::string& key, const json& r, const std::filesystem::path& base) {
  Task t;
  t.id = str_field(r, "id");
  if (t.id.empty()) t.id = key;
  if (t.id.empty()) {
    auto name = str_field(r, "imagename");
    t.id = std::filesystem::path(name).stem().string();
  }
  t.question = str_field(r, "question");
  if (!r.contains("answer") || r["answer"].is_null()) throw RecordError("ground_truth missing");
  t.ground_truth = str_field(r, "answer");
  t.image = load_image(r, "imagename", base);
  t.answer_type = AnswerType::kText;
  if (r.contains("capability")) {
    const auto& c = r["capability"];
    std::vector<std::string> caps;
    if (c.is_array()) {
      caps = c.get<std::vector<std::string>>();
    } else if (c.is_string()) {
      caps = text::split(c.get<std::string>(), ',');
    }
    for (auto& cap : caps) {
      auto v = text::trim(cap);
      for (auto& ch : v) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (!v.empty()) t.category_tags.insert(v);
    }
  }
  return t;
}

Task from_mmmu(const std::string& key, const json& r, const std::filesystem::path& base) {
  Task t;
  t.id = str_field(r, "id");
  if (t.id.empty()) t.id = key;
  t.question = str_field(r, "question");
  if (!r.contains("answer") || r["answer"].is_null()) throw RecordError("ground_truth missing");
  t.ground_truth = str_field(r, "answer");
  t.image = load_image(r, "image_1", base);
  if (r.contains("options")) {
    const auto& o = r["options"];
    if (o.is_array()) {
      t.choices = o.get<std::vector<std::string>>();
    } else if (o.is_string()) {
      t.choices = parse_string_list(o.get<std::string>());
    }
  }
  const auto qtype = str_field(r, "question_type");
  if (qtype == "multiple-choice" || (qtype.empty() && !t.choices.empty())) {
    t.answer_type = AnswerType::kMultichoice;
  } else {
    t.answer_type = guess_open_type(t.ground_truth);
  }
  // "validation_Art_Theory_12" -> "Art_Theory"
  const auto first = t.id.find('_');
  const auto last = t.id.rfind('_');
  if (first != std::string::npos && last != first) t.category_tags.insert(t.id.substr(first + 1, last - first - 1));
  if (r.contains("subfield") && r["subfield"].is_string()) t.category_tags.insert(r["subfield"].get<std::string>());
  return t;
}

}  // namespace

std::string_view to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::kMathVistaLike: return "mathvista_like";
    case DatasetFormat::kMmVetLike: return "mmvet_like";
    case DatasetFormat::kMmmuLike: return "mmmu_like";
  }
  return "mathvista_like";
}

std::optional<DatasetFormat> parse_dataset_format(std::string_view s) {
  for (auto f : {DatasetFormat::kMathVistaLike, DatasetFormat::kMmVetLike, DatasetFormat::kMmmuLike}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

std::optional<std::string> mathvista_tag(std::string_view name) {
  static const std::map<std::string, std::string> kTags = {
      {"figure question answering", "FQA"}, {"geometry problem solving", "GPS"},
      {"math word problem", "MWP"},         {"textbook question answering", "TQA"},
      {"visual question answering", "VQA"}, {"algebraic reasoning", "ALG"},
      {"arithmetic reasoning", "ARI"},      {"geometry reasoning", "GEO"},
      {"logical reasoning", "LOG"},         {"numeric commonsense", "NUM"},
      {"scientific reasoning", "SCI"},      {"statistical reasoning", "STA"},
  };
  const auto key = text::lower(text::trim(name));
  if (auto it = kTags.find(key); it != kTags.end()) return it->second;
  for (const auto& [_, code] : kTags) {
    if (text::lower(code) == key) return code;
  }
  return std::nullopt;
}

std::vector<std::string> parse_string_list(std::string_view s) {
  auto j = json::parse(s, nullptr, false);
  if (!j.is_discarded() && j.is_array()) {
    std::vector<std::string> out;
    for (const auto& v : j) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    return out;
  }
  // Python literal: ['a', "b's", ...]
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size() && s[i] != '[') ++i;
  ++i;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\'' || c == '"') {
      std::string item;
      ++i;
      while (i < s.size() && s[i] != c) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        item += s[i++];
      }
      ++i;
      out.push_back(std::move(item));
    } else if (c == ']') {
      break;
    } else {
      ++i;
    }
  }
  return out;
}

LoadReport load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (!std::filesystem::exists(path)) throw DatasetError(DatasetError::Kind::kIo, "no such file: " + path.string());
  LoadReport report;
  const auto records = read_records(path);
  if (records.empty()) report.warnings.push_back(path.string() + ": no records");
  const auto base = path.parent_path();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& [key, r] = records[i];
    const auto where = "record " + std::to_string(i) + (key.empty() ? "" : " (" + key + ")");
    try {
      if (!r.is_object()) throw RecordError("not an object");
      Task t;
      switch (format) {
        case DatasetFormat::kMathVistaLike: t = from_mathvista(key, r, base); break;
        case DatasetFormat::kMmVetLike: t = from_mmvet(key, r, base); break;
        case DatasetFormat::kMmmuLike: t = from_mmmu(key, r, base); break;
      }
      const auto violations = validate_task(t);
      if (!violations.empty()) {
        std::string msg;
        for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v;
        throw RecordError(msg);
      }
      report.tasks.push_back(std::move(t));
    } catch (const RecordError& e) {
      report.errors.push_back(where + ": " + e.what());
    } catch (const json::exception& e) {
      report.errors.push_back(where + ": " + e.what());
    }
  }
  return report;
}

}  // namespace unac
