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

// Datasets, the synthetic distractor benchmark and end-to-end evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "memsifter/backends.h"
#include "memsifter/config.h"
#include "memsifter/reward.h"
#include "memsifter/task.h"

namespace memsifter {

/// Dataset line: {"task_id", "question", "gold_answers", "gold_session_ids",
/// "bank": [sessions...] | {"path": "..."}}. Relative bank paths resolve
/// against `base_dir`.
Task task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Banks referenced by path are written back as a path; others are inlined.
nlohmann::json task_to_json(const Task& task);

/// Throws ParseError carrying the 1-based task index (the line number).
std::vector<Task> load_dataset(const std::filesystem::path& path);
std::string dataset_to_jsonl(std::span<const Task> tasks);
void save_dataset(std::span<const Task> tasks, const std::filesystem::path& path);

struct SyntheticConfig {
  std::size_t n_tasks = 50;
  std::size_t n_sessions = 20;
  std::size_t n_gold = 1;
  /// Share of non-gold sessions that are distractors.
  double distractor_ratio = 0.3;
  /// Extra chit-chat turns appended to every session; grows banks so the
  /// pre-filter budget comes into play.
  std::size_t padding_turns = 2;
  std::uint64_t seed = 42;
};

/// Each task asks for one attribute of a made-up entity. Gold sessions state
/// the answer; distractors mention the same entity with a different attribute
/// and value; fillers talk about unrelated things. Deterministic under seed.
/// Throws InvalidArgument for an invalid configuration.
std::vector<Task> generate_synthetic(const SyntheticConfig& cfg);

struct EvalRow {
  std::string task_id;
  std::optional<std::string> error;
  std::vector<std::int64_t> ranked_ids;
  std::string answer;
  double f1 = 0.0;
  std::optional<double> ndcg_at_1;
  std::optional<double> ndcg_at_5;
  std::optional<double> recall_at_k;
  std::optional<RewardBreakdown> reward;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // dataset order
  std::size_t success_count = 0;
  /// Means over successful rows; retrieval means over successful rows with
  /// gold sessions.
  double mean_f1 = 0.0;
  std::optional<double> mean_ndcg_at_1;
  std::optional<double> mean_ndcg_at_5;
  std::optional<double> mean_recall_at_k;
  std::optional<double> mean_r_ans;
  std::size_t recall_k = 0;
  std::string config_fingerprint;
};

nlohmann::json report_to_json(const EvalReport& report);
std::string report_rows_csv(const EvalReport& report);

struct EvalBackends {
  ChatBackend* proxy = nullptr;
  ChatBackend* working = nullptr;
  /// May be null when the pre-filter is disabled.
  EmbeddingBackend* embedder = nullptr;
};

struct EvalOptions {
  bool compute_reward = false;
  std::int64_t step = 0;
};

/// Per task: rank, optionally ablate and score the reward, answer with the
/// top-k sessions, then score. Errors inside one task are recorded in its row.
EvalReport run_eval(std::span<const Task> dataset, const PipelineConfig& cfg, const EvalBackends& backends,
                    const EvalOptions& options = {});

/// Recomputes every aggregate from rows.
void aggregate(EvalReport& report);

AnswerScorer scorer_for(const std::string& name);

}  // namespace memsifter
