#include "unac/harness.hpp"

#include "unac/domain_io.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

namespace unac {

using nlohmann::json;

void to_json(json& j, const EvalResult& v) {
  j = json{{"task_id", v.task_id},
           {"predicted", v.predicted},
           {"correct", v.correct},
           {"match_method", to_string(v.match_method)},
           {"category_tags", v.category_tags},
           {"mode", to_string(v.mode)},
           {"wall_time_ms", v.wall_time_ms},
           {"error", v.error}};
  if (v.provider_cost_tokens) j["provider_cost_tokens"] = *v.provider_cost_tokens;
  if (!v.error_message.empty()) j["error_message"] = v.error_message;
}

void from_json(const json& j, EvalResult& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.predicted = j.at("predicted").get<std::string>();
  v.correct = j.at("correct").get<bool>();
  auto method = parse_match_method(j.at("match_method").get<std::string>());
  if (!method) throw std::invalid_argument("unknown match_method");
  v.match_method = *method;
  v.category_tags = j.value("category_tags", std::set<std::string>{});
  auto mode = parse_check_mode(j.value("mode", std::string("gradual")));
  if (!mode) throw std::invalid_argument("unknown mode");
  v.mode = *mode;
  v.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
  if (j.contains("provider_cost_tokens")) v.provider_cost_tokens = j["provider_cost_tokens"].get<std::int64_t>();
  v.error = j.value("error", false);
  v.error_message = j.value("error_message", std::string());
}

std::vector<EvalResult> read_results(const std::filesystem::path& path) {
  std::vector<EvalResult> out;
  std::map<std::string, std::size_t> index;
  const auto records = read_jsonl(path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EvalResult r;
    try {
      r = records[i].get<EvalResult>();
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    if (auto it = index.find(r.task_id); it != index.end()) {
      out[it->second] = std::move(r);
    } else {
      index.emplace(r.task_id, out.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<std::string> column_order(const std::set<std::string>& tags) {
  static const std::vector<std::string> kFixed = {"FQA", "GPS", "MWP", "TQA", "VQA", "ALG",
                                                   "ARI", "GEO", "LOG", "NUM", "SCI", "STA"};
  std::vector<std::string> out;
  for (const auto& t : kFixed) {
    if (tags.count(t)) out.push_back(t);
  }
  for (const auto& t : tags) {
    if (std::find(kFixed.begin(), kFixed.end(), t) == kFixed.end()) out.push_back(t);
  }
  return out;
}

Summary summarize(const std::vector<EvalResult>& results) {
  Summary s;
  std::map<std::string, TagAccuracy> tags;
  for (const auto& r : results) {
    ++s.total;
    if (r.correct) ++s.correct;
    if (r.error) ++s.errored;
    for (const auto& t : r.category_tags) {
      auto& ta = tags[t];
      ta.tag = t;
      ++ta.total;
      if (r.correct) ++ta.correct;
    }
  }
  s.accuracy = s.total ? 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0;
  std::set<std::string> names;
  for (const auto& [k, _] : tags) names.insert(k);
  for (const auto& name : column_order(names)) {
    auto ta = tags[name];
    ta.accuracy = 100.0 * static_cast<double>(ta.correct) / static_cast<double>(ta.total);
    s.tags.push_back(ta);
  }
  return s;
}

json summary_record(const Summary& s, CheckMode mode) {
  json tags = json::array();
  for (const auto& t : s.tags) {
    tags.push_back({{"tag", t.tag}, {"correct", t.correct}, {"total", t.total}, {"accuracy", t.accuracy}});
  }
  return {{"mode", to_string(mode)}, {"total", s.total},     {"correct", s.correct},
          {"errored", s.errored},    {"accuracy", s.accuracy}, {"tags", tags}};
}

std::string render_table(const std::vector<std::pair<std::string, Summary>>& rows) {
  std::set<std::string> names;
  for (const auto& [_, s] : rows) {
    for (const auto& t : s.tags) names.insert(t.tag);
  }
  std::vector<std::string> header = {"Method", "ALL"};
  for (const auto& c : column_order(names)) header.push_back(c);

  std::vector<std::vector<std::string>> cells;
  for (const auto& [label, s] : rows) {
    std::vector<std::string> row = {label, fmt::format("{:.1f}", s.accuracy)};
    for (std::size_t c = 2; c < header.size(); ++c) {
      auto it = std::find_if(s.tags.begin(), s.tags.end(), [&](const TagAccuracy& t) { return t.tag == header[c]; });
      row.push_back(it == s.tags.end() ? "-" : fmt::format("{:.1f}", it->accuracy));
    }
    cells.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += " | ";
      out += c == 0 ? fmt::format("{:<{}}", row[c], width[c]) : fmt::format("{:>{}}", row[c], width[c]);
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::string rule;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) rule += "-+-";
    rule += std::string(width[c], '-');
  }
  out += rule + "\n";
  for (const auto& row : cells) out += line(row);
  return out;
}

namespace {

void check_temperatures(const provider::ProviderSet& providers, const provider::StageRoles& roles) {
  std::set<std::string> ids = {roles.abstract, roles.check, roles.conclude};
  if (roles.analyze) ids.insert(*roles.analyze);
  if (roles.judge) ids.insert(*roles.judge);
  for (const auto& id : ids) {
    const auto& cfg = providers.get(id).config();
    if (cfg.temperature != 0.0) {
      throw provider::ProviderError(
          provider::ErrorKind::kConfig,
          fmt::format("provider '{}' has temperature {}; benchmark runs need 0.0 unless the override is set", id,
                      cfg.temperature));
    }
  }
}

class Appender {
 public:
  Appender(const std::filesystem::path& path, bool truncate) {
    if (path.empty()) return;
    out_.open(path, truncate ? std::ios::trunc : std::ios::app);
    if (!out_) throw std::runtime_error("cannot open " + path.string());
  }
  void write(const std::string& line) {
    if (!out_.is_open()) return;
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace

BenchmarkRun run_benchmark(const std::vector<Task>& tasks, const provider::ProviderSet& providers,
                           const provider::StageRoles& roles, tools::ToolClient& tools, const HarnessConfig& config,
                           const ProgressFn& progress) {
  provider::validate_roles(roles, providers);
  validate(config.pipeline);
  if (!config.allow_nonzero_temperature) check_temperatures(providers, roles);
  if (config.workers < 1) throw std::invalid_argument("eval.workers must be >= 1");

  BenchmarkRun run;
  run.results.resize(tasks.size());
  std::vector<bool> done(tasks.size(), false);

  std::filesystem::path results_path;
  std::filesystem::path transcripts_path;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    results_path = config.output_dir / "results.jsonl";
    transcripts_path = config.output_dir / "transcripts.jsonl";
  }

  if (config.resume && !results_path.empty() && std::filesystem::exists(results_path)) {
    std::map<std::string, EvalResult> previous;
    for (auto& r : read_results(results_path)) previous.emplace(r.task_id, std::move(r));
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      auto it = previous.find(tasks[i].id);
      if (it == previous.end() || it->second.error || it->second.mode != config.pipeline.mode) continue;
      run.results[i] = it->second;
      done[i] = true;
      ++run.resumed;
    }
  }

  Appender results_out(results_path, !config.resume);
  Appender transcripts_out(transcripts_path, !config.resume);

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!done[i]) pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::size_t finished = run.resumed;
  std::exception_ptr fatal;

  auto work = [&] {
    while (!stop) {
      const auto k = next++;
      if (k >= pending.size()) return;
      const auto& task = tasks[pending[k]];
      EvalResult r;
      r.task_id = task.id;
      r.category_tags = task.category_tags;
      r.mode = config.pipeline.mode;
      const auto start = std::chrono::steady_clock::now();
      Session session(providers, roles, task.id, Session::OnError::kDegrade);
      try {
        auto out = run_pipeline(session, task, tools, config.pipeline);
        r.predicted = out.final_answer;
        const auto verdict = match_answer(r.predicted, task, &session);
        r.correct = verdict.correct;
        r.match_method = verdict.method;
        if (verdict.judge_error) {
          r.error = true;
          r.error_message = verdict.error;
        }
      } catch (const provider::ProviderError& e) {
        if (e.kind() == provider::ErrorKind::kAuth) {
          std::lock_guard lock(mu);
          if (!fatal) fatal = std::current_exception();
          stop = true;
          return;
        }
        r.error = true;
        r.error_message = e.what();
      } catch (const std::exception& e) {
        r.error = true;
        r.error_message = e.what();
      }
      r.wall_time_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      if (session.tokens_used() > 0) r.provider_cost_tokens = session.tokens_used();

      transcripts_out.write(to_record(session.transcript()));
      results_out.write(to_record(r));
      std::lock_guard lock(mu);
      run.results[pending[k]] = r;
      ++finished;
      if (progress) progress(r, finished, tasks.size());
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(pending.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n; ++i) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (fatal) std::rethrow_exception(fatal);

  run.summary = summarize(run.results);
  return run;
}

}  // namespace unac
