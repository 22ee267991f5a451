#include "support.hpp"

#include "unac/domain_io.hpp"
#include "unac/error_diff.hpp"
#include "unac/harness.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include <unistd.h>

namespace unac {
namespace {

// Each task's question is unique; every stage answers "FINAL: <scripted>",
// so the pipeline predicts the scripted value for that task.
struct Bench {
  testing::ScriptedWorld world;
  std::vector<Task> tasks;
  tools::NullToolClient tools;

  Bench(int n, int correct, const std::vector<std::set<std::string>>& tags = {}) {
    auto& b = world.add("mock");
    for (int i = 0; i < n; ++i) {
      Task t;
      t.id = "task-" + std::to_string(i);
      t.image = testing::solid_png(6, 6);
      t.question = "Unique question number " + std::to_string(i) + "?";
      t.answer_type = AnswerType::kInteger;
      t.ground_truth = std::to_string(100 + i);
      if (i < static_cast<int>(tags.size())) t.category_tags = tags[i];
      const auto predicted = i < correct ? t.ground_truth : std::to_string(900 + i);
      b.add_rule({t.question}, "FINAL: " + predicted);
      tasks.push_back(std::move(t));
    }
  }
};

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("unac_h_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(RunBenchmark, SevenOfTenIsSeventy) {
  Bench b(10, 7);
  HarnessConfig cfg;
  cfg.workers = 3;
  const auto run = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  EXPECT_EQ(run.summary.total, 10u);
  EXPECT_EQ(run.summary.correct, 7u);
  EXPECT_DOUBLE_EQ(run.summary.accuracy, 70.0);
  ASSERT_EQ(run.results.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(run.results[i].task_id, b.tasks[i].id);
    EXPECT_EQ(run.results[i].correct, i < 7);
    EXPECT_FALSE(run.results[i].error);
  }
}

TEST(RunBenchmark, TagAccuracyOverMembers) {
  const std::set<std::string> gps{"GPS"};
  const std::set<std::string> both{"GPS", "ALG"};
  Bench b(6, 3, {both, gps, {"ALG"}, gps, gps, {}});
  // correct: 0 (GPS, ALG), 1 (GPS), 2 (ALG); wrong: 3 (GPS), 4 (GPS), 5
  HarnessConfig cfg;
  const auto run = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  ASSERT_EQ(run.summary.tags.size(), 2u);
  EXPECT_EQ(run.summary.tags[0].tag, "GPS");
  EXPECT_EQ(run.summary.tags[0].total, 4u);
  EXPECT_DOUBLE_EQ(run.summary.tags[0].accuracy, 50.0);
  EXPECT_EQ(run.summary.tags[1].tag, "ALG");
  EXPECT_DOUBLE_EQ(run.summary.tags[1].accuracy, 100.0);
  EXPECT_DOUBLE_EQ(run.summary.accuracy, 50.0);
}

TEST(RunBenchmark, ResumeSkipsFinishedTasks) {
  const auto dir = temp_dir("resume");
  Bench b(10, 7);
  HarnessConfig cfg;
  cfg.output_dir = dir;
  cfg.workers = 2;
  const auto full = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);

  // Simulate an interrupt after six tasks.
  std::vector<std::string> kept;
  {
    std::ifstream in(dir / "results.jsonl");
    std::string line;
    std::map<std::string, std::string> by_id;
    while (std::getline(in, line)) by_id[nlohmann::json::parse(line)["task_id"]] = line;
    for (int i = 0; i < 6; ++i) kept.push_back(by_id.at("task-" + std::to_string(i)));
  }
  {
    std::ofstream out(dir / "results.jsonl", std::ios::trunc);
    for (const auto& l : kept) out << l << '\n';
  }
  for (auto& [_, backend] : b.world.backends) backend->clear_log();

  cfg.resume = true;
  const auto resumed = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  EXPECT_EQ(resumed.resumed, 6u);
  for (const auto& p : b.world.backends["mock"]->prompts()) {
    for (int i = 0; i < 6; ++i) {
      EXPECT_EQ(p.find("Unique question number " + std::to_string(i) + "?"), std::string::npos);
    }
  }
  EXPECT_GT(b.world.total_calls(), 0u);
  EXPECT_EQ(resumed.summary.accuracy, full.summary.accuracy);
  EXPECT_EQ(read_results(dir / "results.jsonl").size(), 10u);

  // A completed run resumes with no provider calls at all.
  for (auto& [_, backend] : b.world.backends) backend->clear_log();
  const auto again = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  EXPECT_EQ(again.resumed, 10u);
  EXPECT_EQ(b.world.total_calls(), 0u);
  std::filesystem::remove_all(dir);
}

TEST(RunBenchmark, ResumeRerunsOtherModesAndErrors) {
  const auto dir = temp_dir("resume_mode");
  Bench b(3, 3);
  HarnessConfig cfg;
  cfg.output_dir = dir;
  run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  cfg.resume = true;
  cfg.pipeline.mode = CheckMode::kNone;
  const auto r = run_benchmark(b.tasks, b.world.providers, b.world.roles, b.tools, cfg);
  EXPECT_EQ(r.resumed, 0u);
  std::filesystem::remove_all(dir);
}

TEST(RunBenchmark, RefusesNonzeroTemperature) {
  testing::ScriptedWorld w;
  auto cfg = testing::fast_config("warm", provider::Dialect::kScripted, "-");
  cfg.temperature = 0.7;
  w.providers.add(std::make_shared<provider::Provider>(cfg, std::make_shared<provider::ScriptedBackend>()));
  w.roles = {std::nullopt, "warm", "warm", "warm", std::nullopt};
  tools::NullToolClient tools;
  Bench b(1, 1);
  try {
    run_benchmark(b.tasks, w.providers, w.roles, tools, HarnessConfig{});
    FAIL();
  } catch (const provider::ProviderError& e) {
    EXPECT_EQ(e.kind(), provider::ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("warm"), std::string::npos);
  }
  HarnessConfig allow;
  allow.allow_nonzero_temperature = true;
  EXPECT_NO_THROW(run_benchmark(b.tasks, w.providers, w.roles, tools, allow));
}

TEST(RunBenchmark, AuthErrorStopsRun) {
  Bench b(4, 4);
  testing::ScriptedWorld w;
  w.add("mock").add_failure({"Unique question"}, 403);
  HarnessConfig cfg;
  EXPECT_THROW(run_benchmark(b.tasks, w.providers, w.roles, b.tools, cfg), provider::ProviderError);
}

TEST(RunBenchmark, TaskFailuresAreRecordedNotFatal) {
  Bench b(3, 3);
  testing::ScriptedWorld w;
  w.add("mock").add_failure({""}, 500);
  HarnessConfig cfg;
  const auto run = run_benchmark(b.tasks, w.providers, w.roles, b.tools, cfg);
  EXPECT_EQ(run.summary.total, 3u);
  for (const auto& r : run.results) EXPECT_FALSE(r.predicted.empty());
}

TEST(Summary, RenderTableFormat) {
  Summary a;
  a.accuracy = 70.0;
  a.tags = {{"GPS", 1, 2, 50.0}, {"ZZZ", 1, 1, 100.0}};
  Summary b;
  b.accuracy = 66.6667;
  b.tags = {{"FQA", 2, 3, 66.6667}};
  const auto table = render_table({{"gradual", a}, {"global", b}});
  EXPECT_EQ(table,
            "Method  |  ALL |  FQA |  GPS |   ZZZ\n"
            "--------+------+------+------+------\n"
            "gradual | 70.0 |    - | 50.0 | 100.0\n"
            "global  | 66.7 | 66.7 |    - |     -\n");
}

TEST(Summary, ColumnOrderAndRecord) {
  EXPECT_EQ(column_order({"STA", "abc", "FQA", "ALG", "MWP"}),
            (std::vector<std::string>{"FQA", "MWP", "ALG", "STA", "abc"}));
  Summary s;
  s.total = 4;
  s.correct = 1;
  s.accuracy = 25.0;
  const auto j = summary_record(s, CheckMode::kGlobal);
  EXPECT_EQ(j["mode"], "global");
  EXPECT_EQ(j["accuracy"], 25.0);
  EXPECT_TRUE(summarize({}).tags.empty());
  EXPECT_EQ(summarize({}).accuracy, 0.0);
}

TEST(EvalResult, RoundTripAndLastRecordWins) {
  EvalResult r{"t", "5", true, MatchMethod::kNumeric, {"GPS"}, CheckMode::kGlobal, 12, 300, false, ""};
  EXPECT_EQ(from_record<EvalResult>(to_record(r)), r);
  const auto dir = temp_dir("results");
  std::filesystem::create_directories(dir);
  auto r2 = r;
  r2.correct = false;
  std::ofstream(dir / "r.jsonl") << to_record(r) << "\n" << to_record(r2) << "\n";
  const auto read = read_results(dir / "r.jsonl");
  ASSERT_EQ(read.size(), 1u);
  EXPECT_FALSE(read[0].correct);
  std::filesystem::remove_all(dir);
}

// ---- error diff

std::vector<EvalResult> verdicts(const std::map<std::string, bool>& v) {
  std::vector<EvalResult> out;
  for (const auto& [id, ok] : v) {
    EvalResult r;
    r.task_id = id;
    r.correct = ok;
    out.push_back(r);
  }
  return out;
}

TEST(ErrorDiff, QuarterCorrected) {
  const auto base = verdicts({{"a", false}, {"b", false}, {"c", false}, {"d", false}, {"e", true}});
  const auto ours = verdicts({{"a", true}, {"b", false}, {"c", false}, {"d", false}, {"e", true}});
  const auto d = diff_errors(base, ours);
  EXPECT_DOUBLE_EQ(d.corrected_fraction, 0.25);
  EXPECT_DOUBLE_EQ(d.new_error_fraction, 0.0);
  EXPECT_EQ(d.corrected_ids, std::set<std::string>{"a"});
}

TEST(ErrorDiff, IdenticalListsGiveZero) {
  const auto v = verdicts({{"a", false}, {"b", true}});
  const auto d = diff_errors(v, v);
  EXPECT_EQ(d.corrected_fraction, 0.0);
  EXPECT_EQ(d.new_error_fraction, 0.0);
}

TEST(ErrorDiff, RendersSideBySide) {
  ErrorDiff d;
  d.corrected_ids = {"x"};
  d.baseline_wrong = 4;
  d.corrected_fraction = 0.254;
  d.newly_wrong_ids = {"y"};
  d.baseline_right = 18;
  d.new_error_fraction = 0.055;
  EXPECT_EQ(render_diff(d), "Corrected 25.4% of baseline errors (1/4), introduced 5.5% new errors (1/18)\n");
}

TEST(ErrorDiff, MismatchAndDuplicates) {
  EXPECT_THROW(diff_errors(verdicts({{"a", true}}), verdicts({{"b", true}})), DiffError);
  auto dup = verdicts({{"a", true}});
  dup.push_back(dup[0]);
  EXPECT_THROW(diff_errors(dup, dup), DiffError);
}

TEST(ErrorDiff, Annotations) {
  const auto dir = temp_dir("annot");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "a.jsonl") << R"({"task_id":"a","category":"context loss"})" << "\n"
                                 << R"({"task_id":"b","category":"MathError"})" << "\n";
  const auto v = verdicts({{"a", false}, {"b", true}});
  const auto d = diff_errors(v, v, dir / "a.jsonl");
  EXPECT_TRUE(d.annotated);
  EXPECT_EQ(d.category_counts.at(ErrorCategory::kContextLoss), 1u);
  EXPECT_EQ(d.category_counts.at(ErrorCategory::kMisunderstanding), 0u);
  EXPECT_EQ(d.category_counts.at(ErrorCategory::kMathError), 1u);
  const auto text = render_diff(d);
  EXPECT_NE(text.find("Annotated cases: 2"), std::string::npos);
  EXPECT_NE(text.find("ContextLoss"), std::string::npos);

  std::ofstream(dir / "bad.jsonl") << R"({"task_id":"a","category":"Laziness"})" << "\n";
  EXPECT_THROW(diff_errors(v, v, dir / "bad.jsonl"), DiffError);
  std::ofstream(dir / "bad2.jsonl") << R"({"task_id":"zz","category":"MathError"})" << "\n";
  EXPECT_THROW(diff_errors(v, v, dir / "bad2.jsonl"), DiffError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace unac
