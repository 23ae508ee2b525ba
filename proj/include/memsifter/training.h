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

// RL data preparation for an external GRPO trainer: curriculum selection,
// zero-variance group filtering, group-relative advantages, trajectory export
// and checkpoint averaging.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "memsifter/ranker.h"
#include "memsifter/reward.h"

namespace memsifter {

struct CurriculumConfig {
  double tau = 0.2;
  std::size_t budget = 1;
};

/// The `budget` tasks whose performance is closest to tau, ordered by
/// distance and then task id.
std::vector<std::string> select_curriculum(const std::map<std::string, double>& perf, const CurriculumConfig& cfg);

struct TrajectoryRecord {
  std::string task_id;
  std::string prompt;
  std::string raw_output;
  /// Empty when the output could not be parsed; failure_reason says why.
  std::optional<RankingResult> ranking;
  std::optional<std::string> failure_reason;
  RewardBreakdown reward;
  std::optional<double> advantage;
};

void to_json(nlohmann::json& j, const TrajectoryRecord& r);
void from_json(const nlohmann::json& j, TrajectoryRecord& r);

struct RolloutGroup {
  std::string task_id;
  std::vector<TrajectoryRecord> rollouts;
};

/// Population standard deviation of the group's total rewards.
double reward_std(const RolloutGroup& group);

/// Keeps groups whose reward standard deviation exceeds `eps`; survivors are
/// returned unchanged.
std::vector<RolloutGroup> filter_groups(std::span<const RolloutGroup> groups, double eps);

/// (r - mean) / std with the population std; all zeros when std <= eps.
std::vector<double> grpo_advantages(std::span<const double> rewards, double eps = 1e-8);

/// Fills every rollout's advantage from its group's rewards.
void assign_advantages(RolloutGroup& group, double eps = 1e-8);

/// One JSON line per rollout. Returns the number of lines written.
std::size_t export_trajectories(std::span<const RolloutGroup> groups, const std::filesystem::path& path);
std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path);

struct ParamTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

/// Named flat parameter tensors.
struct ParamMap {
  std::map<std::string, ParamTensor> entries;

  /// Throws ShapeError when product(shape) != values.size() for some entry.
  void validate() const;

  friend bool operator==(const ParamMap&, const ParamMap&) = default;
};

/// Elementwise arithmetic mean. Throws ShapeError naming the first entry
/// whose name or shape differs between inputs.
ParamMap merge_checkpoints(std::span<const ParamMap> maps);

/// `{"entries": {name: {"shape": [...], "values": [...]}}}`
void save_param_map(const ParamMap& map, const std::filesystem::path& path);
ParamMap load_param_map(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const ParamMap& m);
void from_json(const nlohmann::json& j, ParamMap& m);

/// Checkpoints ranked by validation score (descending, ties by input order);
/// returns the indices of the best `k`.
std::vector<std::size_t> top_k_checkpoints(std::span<const double> validation_scores, std::size_t k = 3);

struct RolloutOptions {
  std::size_t group_size = 6;
  RankOptions rank;
  RewardOptions reward;
};

/// Samples `group_size` proxy outputs for one task and scores each. Outputs
/// that fail strict format checks become failure-marked records with a total
/// reward of 0. Advantages are left unset.
RolloutGroup collect_rollouts(const Task& task, ChatBackend& proxy, EmbeddingBackend* embedder,
                              ChatBackend& working, const AnswerScorer& scorer, const RolloutOptions& options);

}  // namespace memsifter
