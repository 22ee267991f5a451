#include "unac/checking.hpp"
#include "unac/config.hpp"
#include "unac/dataset.hpp"
#include "unac/domain_io.hpp"
#include "unac/error_diff.hpp"
#include "unac/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <iostream>

namespace {

using namespace unac;

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kAuth = 3, kPartial = 4 };

struct Common {
  std::string config_path;
  std::string mode;
  std::string stage_roles;
  std::optional<double> threshold;
  std::optional<int> max_regions;
  std::optional<int> max_subq;
  std::string output_dir;
  std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Run config file")->required();
  cmd->add_option("--mode", c.mode, "Checking mode: gradual, global or none")
      ->check(CLI::IsMember({"gradual", "global", "none"}));
  cmd->add_option("--stage-roles", c.stage_roles, "Per-stage provider ids, e.g. abstract=g,check=l,conclude=l");
  cmd->add_option("--threshold", c.threshold, "Region stability threshold in [0,1]");
  cmd->add_option("--max-regions", c.max_regions, "Most markers drawn on one image");
  cmd->add_option("--max-subq", c.max_subq, "Most sub-questions per task");
  cmd->add_option("--output-dir", c.output_dir, "Exact output directory (default: timestamped under output.root)");
  cmd->add_option("--set", c.settings, "Config override section.key=value (repeatable)");
}

RunConfig load_with_overrides(const Common& c) {
  auto cfg = load_config(c.config_path);
  for (const auto& s : c.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!c.mode.empty()) apply_setting(cfg, "pipeline.mode", c.mode);
  if (!c.stage_roles.empty()) {
    for (const auto& part : CLI::detail::split(c.stage_roles, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw ConfigError("--stage-roles expects role=id pairs, got '" + part + "'");
      apply_setting(cfg, "roles." + part.substr(0, eq), part.substr(eq + 1));
    }
  }
  if (c.threshold) cfg.pipeline.visprompt.threshold = *c.threshold;
  if (c.max_regions) cfg.pipeline.visprompt.max_regions = *c.max_regions;
  if (c.max_subq) cfg.pipeline.max_subq = *c.max_subq;
  validate(cfg);
  return cfg;
}

std::filesystem::path make_output_dir(const RunConfig& cfg, const std::string& explicit_dir, const char* kind) {
  std::filesystem::path dir;
  if (!explicit_dir.empty()) {
    dir = explicit_dir;
  } else {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const auto root = cfg.output_root.is_absolute() ? cfg.output_root : cfg.base_dir / cfg.output_root;
    dir = root / fmt::format("{}-{}", stamp, kind);
    for (int i = 2; std::filesystem::exists(dir); ++i) dir = root / fmt::format("{}-{}-{}", stamp, kind, i);
  }
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "config.snapshot.ini", render_config(cfg));
  return dir;
}

struct RunArgs {
  Common common;
  std::string image;
  std::string question;
  std::string answer_type = "text";
  std::vector<std::string> choices;
};

int cmd_run(const RunArgs& a) {
  const auto cfg = load_with_overrides(a.common);
  Task task;
  task.id = "cli";
  task.question = a.question;
  task.image = ImageBlob::from_bytes(read_file(a.image));
  task.answer_type = *parse_answer_type(a.answer_type);
  task.choices = a.choices;
  // The CLI has no ground truth; use the first choice so validation passes.
  if (task.answer_type == AnswerType::kMultichoice && !task.choices.empty()) task.ground_truth = "A";
  auto violations = validate_task(task);
  if (!violations.empty()) {
    std::cerr << "invalid task: " << violations.front() << "\n";
    return kUsage;
  }

  auto providers = build_providers(cfg);
  auto tools = build_tool_client(cfg);
  const auto dir = make_output_dir(cfg, a.common.output_dir, "run");
  auto result = run_pipeline(task, providers, cfg.roles, *tools, cfg.pipeline);

  write_file_atomic(dir / "transcript.jsonl", to_record(result.transcript) + "\n");
  write_file_atomic(dir / "marked.png", result.visual.marked.image.bytes());
  nlohmann::json summary{{"final_answer", result.final_answer},
                         {"check_session", result.check},
                         {"abstraction", result.abstraction},
                         {"info_needs", result.visual.needs},
                         {"legend", result.visual.marked.legend},
                         {"warnings", result.transcript.warnings}};
  write_file_atomic(dir / "result.json", summary.dump(2) + "\n");
  for (const auto& w : result.transcript.warnings) spdlog::warn("{}", w);
  spdlog::info("artifacts in {}", dir.string());
  std::cout << result.final_answer << "\n";
  return kOk;
}

struct EvalArgs {
  Common common;
  std::string dataset;
  std::string format;
  std::optional<int> workers;
  bool resume = false;
  bool compare_modes = false;
  bool allow_nonzero_temperature = false;
};

int cmd_eval(const EvalArgs& a) {
  auto cfg = load_with_overrides(a.common);
  if (a.workers) cfg.workers = *a.workers;
  if (a.allow_nonzero_temperature) cfg.allow_nonzero_temperature = true;
  if (a.resume && a.common.output_dir.empty()) {
    std::cerr << "--resume needs --output-dir naming the run to resume\n";
    return kUsage;
  }
  const auto format = *parse_dataset_format(a.format);
  auto report = load_dataset(a.dataset, format);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  for (const auto& e : report.errors) spdlog::warn("skipped {}", e);
  spdlog::info("loaded {} tasks from {}", report.tasks.size(), a.dataset);

  auto providers = build_providers(cfg);
  auto tools = build_tool_client(cfg);
  const auto dir = make_output_dir(cfg, a.common.output_dir, "eval");

  std::vector<CheckMode> modes = {cfg.pipeline.mode};
  if (a.compare_modes) modes = {CheckMode::kGradual, CheckMode::kGlobal, CheckMode::kNone};

  std::vector<std::pair<std::string, Summary>> rows;
  bool partial = false;
  for (auto mode : modes) {
    HarnessConfig hc;
    hc.pipeline = cfg.pipeline;
    hc.pipeline.mode = mode;
    hc.workers = cfg.workers;
    hc.resume = a.resume;
    hc.allow_nonzero_temperature = cfg.allow_nonzero_temperature;
    hc.output_dir = a.compare_modes ? dir / std::string(to_string(mode)) : dir;
    auto run = run_benchmark(report.tasks, providers, cfg.roles, *tools, hc,
                             [](const EvalResult& r, std::size_t done, std::size_t total) {
                               spdlog::info("[{}/{}] {} {} ({}){}", done, total, r.task_id,
                                            r.correct ? "correct" : "wrong", to_string(r.match_method),
                                            r.error ? " error: " + r.error_message : "");
                             });
    if (run.resumed) spdlog::info("{} tasks taken from the earlier run", run.resumed);
    partial = partial || run.summary.errored > 0;
    write_file_atomic(hc.output_dir / "summary.json", summary_record(run.summary, mode).dump(2) + "\n");
    const auto table = render_table({{std::string(to_string(mode)), run.summary}});
    write_file_atomic(hc.output_dir / "summary.txt", table);
    rows.emplace_back(std::string(to_string(mode)), run.summary);
  }
  const auto table = render_table(rows);
  if (a.compare_modes) write_file_atomic(dir / "comparison.txt", table);
  std::cout << table;
  spdlog::info("results in {}", dir.string());
  return partial ? kPartial : kOk;
}

struct DiffArgs {
  std::string baseline;
  std::string ours;
  std::string annotations;
};

int cmd_diff(const DiffArgs& a) {
  std::optional<std::filesystem::path> ann;
  if (!a.annotations.empty()) ann = a.annotations;
  const auto diff = diff_errors(read_results(a.baseline), read_results(a.ours), ann);
  std::cout << render_diff(diff);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("unac"));
  CLI::App app{"Multimodal prompting pipeline and benchmark harness"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Answer one question about one image");
  add_common(run_cmd, run.common);
  run_cmd->add_option("--image", run.image, "PNG or JPEG file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--question", run.question, "Question text")->required();
  run_cmd->add_option("--answer-type", run.answer_type, "integer, float, text or multichoice")
      ->check(CLI::IsMember({"integer", "float", "text", "multichoice"}));
  run_cmd->add_option("--choice", run.choices, "Answer choice (repeatable)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Run a benchmark dataset");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--dataset", eval.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--format", eval.format, "mathvista_like, mmvet_like or mmmu_like")
      ->required()
      ->check(CLI::IsMember({"mathvista_like", "mmvet_like", "mmmu_like"}));
  eval_cmd->add_option("--workers", eval.workers, "Concurrent tasks");
  eval_cmd->add_flag("--resume", eval.resume, "Skip tasks already completed in --output-dir");
  eval_cmd->add_flag("--compare-modes", eval.compare_modes, "Run gradual, global and none, print one table");
  eval_cmd->add_flag("--allow-nonzero-temperature", eval.allow_nonzero_temperature,
                     "Permit providers with temperature != 0");

  DiffArgs diff;
  auto* diff_cmd = app.add_subcommand("diff", "Compare baseline and method results");
  diff_cmd->add_option("--baseline", diff.baseline, "Baseline results.jsonl")->required()->check(CLI::ExistingFile);
  diff_cmd->add_option("--ours", diff.ours, "Method results.jsonl")->required()->check(CLI::ExistingFile);
  diff_cmd->add_option("--annotations", diff.annotations, "JSON Lines of {task_id, category}")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*eval_cmd) return cmd_eval(eval);
    return cmd_diff(diff);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kConfig;
  } catch (const provider::ProviderError& e) {
    spdlog::error("{}", e.what());
    if (e.kind() == provider::ErrorKind::kAuth) return kAuth;
    if (e.kind() == provider::ErrorKind::kConfig || e.kind() == provider::ErrorKind::kUnknownProvider) return kConfig;
    return kPartial;
  } catch (const DatasetError& e) {
    spdlog::error("dataset: {}", e.what());
    return kUsage;
  } catch (const DiffError& e) {
    spdlog::error("diff: {}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kPartial;
  }
}
