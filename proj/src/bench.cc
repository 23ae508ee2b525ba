// Copyright 2026 The MemSifter Engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "memsifter/bench.h"

#include <algorithm>
#include <cstdio>
#include <array>
#include <cmath>
#include <random>
#include <unordered_set>

#include "memsifter/errors.h"
#include "memsifter/ranker.h"
#include "parallel.h"
#include "text_util.h"

namespace memsifter {

using nlohmann::json;

namespace {

json bank_sessions_json(const MemoryBank& bank) {
  json arr = json::array();
  const std::string jsonl = bank_to_jsonl(bank);
  std::size_t start = 0;
  while (start < jsonl.size()) {
    const std::size_t end = jsonl.find('\n', start);
    arr.push_back(json::parse(jsonl.substr(start, end - start)));
    start = end + 1;
  }
  return arr;
}

}  // namespace

Task task_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw InvalidArgument("task must be a JSON object");
  Task t;
  t.task_id = j.at("task_id").get<std::string>();
  t.question = j.at("question").get<std::string>();
  if (!j.contains("gold_answers")) throw InvalidArgument("missing gold_answers");
  t.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
  if (t.gold_answers.empty()) throw InvalidArgument("gold_answers must be non-empty");
  if (auto it = j.find("gold_session_ids"); it != j.end() && !it->is_null()) {
    const auto ids = it->get<std::vector<std::int64_t>>();
    t.gold_session_ids = std::set<std::int64_t>(ids.begin(), ids.end());
  }
  const json& bank = j.at("bank");
  if (bank.is_array()) {
    std::string jsonl;
    for (const json& s : bank) jsonl += s.dump() + "\n";
    t.bank = std::make_shared<const MemoryBank>(bank_from_jsonl(jsonl, t.task_id));
  } else if (bank.is_object() && bank.contains("path")) {
    const std::string rel = bank.at("path").get<std::string>();
    t.bank_path = rel;
    const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel)
                                                                              : base_dir / rel;
    t.bank = std::make_shared<const MemoryBank>(load_bank(p));
  } else {
    throw InvalidArgument("'bank' must be an array of sessions or {\"path\": ...}");
  }
  if (t.gold_session_ids) {
    for (std::int64_t id : *t.gold_session_ids) {
      if (t.bank->find(id) == nullptr) {
        throw InvalidArgument("gold session id " + std::to_string(id) + " is not in the bank");
      }
    }
  }
  return t;
}

json task_to_json(const Task& task) {
  json j;
  j["task_id"] = task.task_id;
  j["question"] = task.question;
  j["gold_answers"] = task.gold_answers;
  if (task.gold_session_ids) {
    j["gold_session_ids"] = std::vector<std::int64_t>(task.gold_session_ids->begin(), task.gold_session_ids->end());
  } else {
    j["gold_session_ids"] = nullptr;
  }
  if (task.bank_path) {
    j["bank"] = {{"path", *task.bank_path}};
  } else {
    j["bank"] = task.bank ? bank_sessions_json(*task.bank) : json::array();
  }
  return j;
}

std::vector<Task> load_dataset(const std::filesystem::path& path) {
  const std::string text = text::read_file(path);
  const std::filesystem::path base = path.parent_path();
  std::vector<Task> tasks;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line = text::trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    try {
      tasks.push_back(task_from_json(json::parse(line), base));
    } catch (const json::exception& e) {
      throw ParseError(line_no, "task " + std::to_string(tasks.size()) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, "task " + std::to_string(tasks.size()) + ": " + e.what());
    } catch (const IntegrityError& e) {
      throw ParseError(line_no, "task " + std::to_string(tasks.size()) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(line_no, "task " + std::to_string(tasks.size()) + ": " + e.what());
    }
  }
  return tasks;
}

std::string dataset_to_jsonl(std::span<const Task> tasks) {
  std::string out;
  for (const Task& t : tasks) {
    out += task_to_json(t).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(std::span<const Task> tasks, const std::filesystem::path& path) {
  text::write_file(path, dataset_to_jsonl(tasks));
}

namespace {

constexpr std::array<std::string_view, 14> kAttributes = {
    "color",  "city",   "breed",  "hobby",    "instrument", "cuisine", "sport",
    "flower", "gemstone", "language", "planet", "fabric",     "song",    "vehicle"};

constexpr std::array<std::string_view, 16> kTopics = {
    "weekend", "hiking",  "recipe", "garden",  "movie", "weather", "coffee",  "train",
    "museum",  "novel",   "podcast", "bicycle", "beach", "concert", "bakery", "library"};

constexpr std::array<std::string_view, 12> kSyllables = {"zo", "ra", "ki", "vu", "ne", "ta",
                                                         "lo", "mi", "su", "pe", "gra", "dor"};

class SyntheticRng {
 public:
  explicit SyntheticRng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

std::string fresh_word(SyntheticRng& rng, std::unordered_set<std::string>& used) {
  for (;;) {
    std::string w;
    const std::size_t syllables = 3 + rng.below(2);
    for (std::size_t i = 0; i < syllables; ++i) w += kSyllables[rng.below(kSyllables.size())];
    if (used.insert(w).second) return w;
  }
}

std::string_view pick_topic(SyntheticRng& rng) { return kTopics[rng.below(kTopics.size())]; }

void add_padding(std::vector<Turn>& turns, SyntheticRng& rng, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::string topic(pick_topic(rng));
    if (i % 2 == 0) {
      turns.push_back({Role::kUser, "By the way, the " + topic + " schedule changed again this week.", {}});
    } else {
      turns.push_back({Role::kAssistant, "Thanks for the update about the " + topic + " plans.", {}});
    }
  }
}

}  // namespace

std::vector<Task> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_tasks < 1) throw InvalidArgument("n_tasks must be >= 1");
  if (cfg.n_sessions < 1) throw InvalidArgument("n_sessions must be >= 1");
  if (cfg.n_gold < 1 || cfg.n_gold > cfg.n_sessions) throw InvalidArgument("n_gold must lie in [1, n_sessions]");
  if (!(cfg.distractor_ratio >= 0.0 && cfg.distractor_ratio <= 1.0)) {
    throw InvalidArgument("distractor_ratio must lie in [0, 1]");
  }

  SyntheticRng rng(cfg.seed);
  std::unordered_set<std::string> used;
  for (auto w : kAttributes) used.emplace(w);
  for (auto w : kTopics) used.emplace(w);

  const std::size_t others = cfg.n_sessions - cfg.n_gold;
  const auto n_distractors =
      static_cast<std::size_t>(std::llround(cfg.distractor_ratio * static_cast<double>(others)));

  std::vector<Task> tasks;
  tasks.reserve(cfg.n_tasks);
  for (std::size_t t = 0; t < cfg.n_tasks; ++t) {
    const std::string entity = fresh_word(rng, used);
    const std::string answer = fresh_word(rng, used);
    const std::size_t attr_index = rng.below(kAttributes.size());
    const std::string attr(kAttributes[attr_index]);

    // Session kind per slot: 0 gold, 1 distractor, 2 filler.
    std::vector<int> kinds;
    kinds.insert(kinds.end(), cfg.n_gold, 0);
    kinds.insert(kinds.end(), n_distractors, 1);
    kinds.insert(kinds.end(), others - n_distractors, 2);
    for (std::size_t i = kinds.size(); i > 1; --i) std::swap(kinds[i - 1], kinds[rng.below(i)]);

    std::vector<Session> sessions;
    std::set<std::int64_t> gold_ids;
    std::size_t gold_seen = 0;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      std::vector<Turn> turns;
      const auto id = static_cast<std::int64_t>(i);
      if (kinds[i] == 0) {
        if (gold_seen++ % 2 == 0) {
          turns.push_back({Role::kUser, "Quick note about my " + entity + ": the " + attr + " of my " + entity +
                                            " is " + answer + ".", {}});
          turns.push_back({Role::kAssistant, "Got it, I will remember that the " + attr + " of your " + entity +
                                                 " is " + answer + ".", {}});
        } else {
          turns.push_back({Role::kUser, "Reminder: my " + entity + " has " + answer + " as its " + attr + ".", {}});
          turns.push_back({Role::kAssistant, "Understood, " + answer + " is the " + attr + " of your " + entity + ".",
                           {}});
        }
        gold_ids.insert(id);
      } else if (kinds[i] == 1) {
        std::size_t other = rng.below(kAttributes.size() - 1);
        if (other >= attr_index) ++other;
        const std::string other_attr(kAttributes[other]);
        const std::string other_value = fresh_word(rng, used);
        turns.push_back({Role::kUser, "Another thing about my " + entity + ": the " + other_attr + " of my " +
                                          entity + " is " + other_value + ".", {}});
        turns.push_back({Role::kAssistant, "Noted, the " + other_attr + " of your " + entity + " is " + other_value +
                                               ".", {}});
      } else {
        const std::string a(pick_topic(rng));
        const std::string b(pick_topic(rng));
        turns.push_back({Role::kUser, "I spent the weekend thinking about " + a + " and " + b + ".", {}});
        turns.push_back({Role::kAssistant, "That sounds lovely, " + a + " is a great way to relax.", {}});
      }
      add_padding(turns, rng, cfg.padding_turns);
      sessions.push_back(Session::create(id, std::move(turns)));
    }

    Task task;
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "syn-%04zu", t);
    task.task_id = id_buf;
    task.question = "What is the " + attr + " of my " + entity + "?";
    task.gold_answers = {answer};
    task.gold_session_ids = std::move(gold_ids);
    task.bank = std::make_shared<const MemoryBank>(MemoryBank::create(std::move(sessions), task.task_id));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

AnswerScorer scorer_for(const std::string& name) {
  if (name == "f1") return score_answer_f1;
  if (name == "exact") return score_exact_match;
  throw InvalidArgument("unknown scorer '" + name + "'");
}

void aggregate(EvalReport& report) {
  report.success_count = 0;
  double f1 = 0, n1 = 0, n5 = 0, rec = 0, rans = 0;
  std::size_t n_gold = 0, n_reward = 0;
  for (const EvalRow& row : report.rows) {
    if (row.error) continue;
    ++report.success_count;
    f1 += row.f1;
    if (row.ndcg_at_1) {
      ++n_gold;
      n1 += *row.ndcg_at_1;
      n5 += row.ndcg_at_5.value_or(0.0);
      rec += row.recall_at_k.value_or(0.0);
    }
    if (row.reward) {
      ++n_reward;
      rans += row.reward->r_ans;
    }
  }
  const auto mean = [](double sum, std::size_t n) { return sum / static_cast<double>(n); };
  report.mean_f1 = report.success_count > 0 ? mean(f1, report.success_count) : 0.0;
  report.mean_ndcg_at_1 = n_gold > 0 ? std::optional(mean(n1, n_gold)) : std::nullopt;
  report.mean_ndcg_at_5 = n_gold > 0 ? std::optional(mean(n5, n_gold)) : std::nullopt;
  report.mean_recall_at_k = n_gold > 0 ? std::optional(mean(rec, n_gold)) : std::nullopt;
  report.mean_r_ans = n_reward > 0 ? std::optional(mean(rans, n_reward)) : std::nullopt;
}

EvalReport run_eval(std::span<const Task> dataset, const PipelineConfig& cfg, const EvalBackends& backends,
                    const EvalOptions& options) {
  validate(cfg);
  if (dataset.empty()) throw InvalidArgument("dataset is empty");
  if (backends.proxy == nullptr || backends.working == nullptr) throw InvalidArgument("proxy and working backends are required");
  if (cfg.prefilter_enabled && backends.embedder == nullptr) {
    throw InvalidArgument("prefilter enabled but no embedding backend supplied");
  }
  const AnswerScorer reward_scorer = scorer_for(cfg.scorer);

  RankOptions rank_opts;
  rank_opts.prefilter = {cfg.prefilter_enabled, cfg.proxy_context_budget_tokens};
  rank_opts.top_k = cfg.top_k;
  rank_opts.model = cfg.proxy.model;
  rank_opts.temperature = 0.0;

  RewardOptions reward_opts;
  reward_opts.include_full = cfg.include_full_cutoff;
  reward_opts.alpha = cfg.alpha;
  reward_opts.anneal = {cfg.beta0, cfg.resolved_anneal_steps(dataset.size())};
  reward_opts.step = options.step;
  reward_opts.ablation.model = cfg.working.model;
  reward_opts.ablation.temperature = cfg.working_temperature;
  reward_opts.ablation.max_concurrency = cfg.working.policy.max_concurrency;

  EvalReport report;
  report.rows.resize(dataset.size());
  report.recall_k = cfg.top_k;
  report.config_fingerprint = cfg.fingerprint();

  detail::parallel_for(dataset.size(), static_cast<int>(cfg.eval_concurrency), [&](std::size_t i) {
    const Task& task = dataset[i];
    EvalRow& row = report.rows[i];
    row.task_id = task.task_id;
    try {
      if (!task.bank) throw InvalidArgument("task has no memory bank");
      const RankingResult ranking =
          rank(task.question, *task.bank, rank_opts, *backends.proxy, backends.embedder);
      row.ranked_ids = ranking.ranked_ids;
      if (options.compute_reward) {
        RewardOptions per_task = reward_opts;
        if (!task.gold_session_ids) per_task.anneal.beta0 = 0.0;
        row.reward = compute_reward(task, ranking, *backends.working, reward_scorer, per_task);
      }
      const auto sessions = top_sessions(*task.bank, ranking.ranked_ids, cfg.top_k);
      ChatRequest request =
          ChatRequest::user(build_answer_prompt(task.question, sessions), cfg.working.model, cfg.working_temperature);
      row.answer = backends.working->complete(request);
      row.f1 = score_answer_f1(row.answer, task.gold_answers);
      if (task.gold_session_ids) {
        row.ndcg_at_1 = retrieval_reward_ndcg(ranking.ranked_ids, *task.gold_session_ids, 1);
        row.ndcg_at_5 = retrieval_reward_ndcg(ranking.ranked_ids, *task.gold_session_ids, 5);
        row.recall_at_k = recall_at_k(ranking.ranked_ids, *task.gold_session_ids, cfg.top_k);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  aggregate(report);
  return report;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", *v);
  return buf;
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json j;
  j["config_fingerprint"] = report.config_fingerprint;
  j["task_count"] = report.rows.size();
  j["success_count"] = report.success_count;
  j["recall_k"] = report.recall_k;
  j["aggregate"] = {{"f1", report.mean_f1},
                    {"ndcg@1", optional_number(report.mean_ndcg_at_1)},
                    {"ndcg@5", optional_number(report.mean_ndcg_at_5)},
                    {"recall@k", optional_number(report.mean_recall_at_k)},
                    {"r_ans", optional_number(report.mean_r_ans)}};
  j["rows"] = json::array();
  for (const EvalRow& r : report.rows) {
    json row;
    row["task_id"] = r.task_id;
    row["error"] = r.error ? json(*r.error) : json(nullptr);
    row["ranked_ids"] = r.ranked_ids;
    row["answer"] = r.answer;
    row["f1"] = r.f1;
    row["ndcg@1"] = optional_number(r.ndcg_at_1);
    row["ndcg@5"] = optional_number(r.ndcg_at_5);
    row["recall@k"] = optional_number(r.recall_at_k);
    row["reward"] = r.reward ? json(*r.reward) : json(nullptr);
    j["rows"].push_back(std::move(row));
  }
  return j;
}

std::string report_rows_csv(const EvalReport& report) {
  std::string out = "task_id,error,f1,ndcg@1,ndcg@5,recall@k,r_ans,r_total,ranked_ids\n";
  for (const EvalRow& r : report.rows) {
    std::string ids;
    for (std::size_t i = 0; i < r.ranked_ids.size(); ++i) {
      if (i > 0) ids += ' ';
      ids += std::to_string(r.ranked_ids[i]);
    }
    out += csv_field(r.task_id) + "," + csv_field(r.error.value_or("")) + "," + csv_number(r.f1) + "," +
           csv_number(r.ndcg_at_1) + "," + csv_number(r.ndcg_at_5) + "," + csv_number(r.recall_at_k) + "," +
           csv_number(r.reward ? std::optional(r.reward->r_ans) : std::nullopt) + "," +
           csv_number(r.reward ? std::optional(r.reward->r_total) : std::nullopt) + "," + ids + "\n";
  }
  return out;
}

}  // namespace memsifter
