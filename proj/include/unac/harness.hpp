#pragma once

// Benchmark runs: pipeline per task on a worker pool, answer matching,
// per-category accuracy and table rendering, resumable result files.

#include "unac/answer_match.hpp"
#include "unac/checking.hpp"
#include "unac/domain.hpp"
#include "unac/provider.hpp"
#include "unac/toolclient.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace unac {

struct EvalResult {
  std::string task_id;
  std::string predicted;
  bool correct = false;
  MatchMethod match_method = MatchMethod::kExact;
  std::set<std::string> category_tags;
  CheckMode mode = CheckMode::kGradual;
  std::int64_t wall_time_ms = 0;
  std::optional<std::int64_t> provider_cost_tokens;
  bool error = false;  // the task failed or the judge failed
  std::string error_message;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

void to_json(nlohmann::json& j, const EvalResult& v);
void from_json(const nlohmann::json& j, EvalResult& v);

/// Last record per task id wins.
std::vector<EvalResult> read_results(const std::filesystem::path& path);

struct HarnessConfig {
  PipelineConfig pipeline;
  int workers = 1;
  bool resume = false;
  bool allow_nonzero_temperature = false;
  // results.jsonl and transcripts.jsonl go here; empty keeps results in memory.
  std::filesystem::path output_dir;
};

struct TagAccuracy {
  std::string tag;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent
};

struct Summary {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t errored = 0;
  double accuracy = 0.0;  // percent
  std::vector<TagAccuracy> tags;  // column order
};

/// ALL = correct/total; each tag over the tasks carrying it.
Summary summarize(const std::vector<EvalResult>& results);

/// Known benchmark columns first (FQA GPS MWP TQA VQA ALG ARI GEO LOG NUM SCI
/// STA), then any other tags alphabetically.
std::vector<std::string> column_order(const std::set<std::string>& tags);

nlohmann::json summary_record(const Summary& summary, CheckMode mode);

/// Plain-text table: one header row (ALL, then tags) and one row per entry.
std::string render_table(const std::vector<std::pair<std::string, Summary>>& rows);

struct BenchmarkRun {
  std::vector<EvalResult> results;  // in task order
  Summary summary;
  std::size_t resumed = 0;  // tasks taken from an earlier results file
};

/// Called after each finished task, from worker threads (serialized).
using ProgressFn = std::function<void(const EvalResult&, std::size_t done, std::size_t total)>;

/// Throws ProviderError(kConfig) when a bound provider has temperature != 0
/// without the override, and rethrows auth errors after stopping the workers.
BenchmarkRun run_benchmark(const std::vector<Task>& tasks, const provider::ProviderSet& providers,
                           const provider::StageRoles& roles, tools::ToolClient& tools, const HarnessConfig& config,
                           const ProgressFn& progress = {});

}  // namespace unac
