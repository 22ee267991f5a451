#pragma once

// Benchmark ingestion. Files may be a JSON array of records, a JSON object
// keyed by record id, or JSON Lines. Image fields hold a path (relative to
// the dataset file), a data: URL, or inline base64.

#include "unac/domain.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace unac {

enum class DatasetFormat { kMathVistaLike, kMmVetLike, kMmmuLike };
std::string_view to_string(DatasetFormat f);
std::optional<DatasetFormat> parse_dataset_format(std::string_view s);

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { kIo, kFormat };
  DatasetError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct LoadReport {
  std::vector<Task> tasks;
  std::vector<std::string> errors;    // one per rejected record, naming its index
  std::vector<std::string> warnings;
};

/// Throws DatasetError(kIo) when the file cannot be read and
/// DatasetError(kFormat) when it is not JSON / JSON Lines at all. Records
/// that fail to convert or validate are listed in `errors` and skipped.
LoadReport load_dataset(const std::filesystem::path& path, DatasetFormat format);

/// Category tag for a MathVista task or skill name ("geometry problem
/// solving" -> "GPS"); the input itself when it already is a code.
std::optional<std::string> mathvista_tag(std::string_view name);

/// Parses a JSON list or a Python-literal list of strings.
std::vector<std::string> parse_string_list(std::string_view s);

}  // namespace unac
