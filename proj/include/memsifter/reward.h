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

// Task-outcome reward for a ranking.
//
// The working LLM answers the task with no memory (s0) and then with the top
// k_n ranked sessions for each cutoff k_n of a Fibonacci schedule. Marginal
// gains s_{k_n} - s_{k_{n-1}} are discounted by D_n = 1 / log2(k_n + 1), which
// regroups into
//
//   R_ans = -D_1 * s0 + sum_n w_n * s_{k_n},   w_n = D_n - D_{n+1},  w_N = D_N
//
// and with k_1 = 1 (D_1 = 1) the baseline term is a plain -s0. A retrieval
// term (NDCG against gold sessions) can be mixed in during warm-up:
// R = alpha * R_ans + beta * R_ret, with beta annealed linearly to zero.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memsifter/backends.h"
#include "memsifter/memory_store.h"
#include "memsifter/ranker.h"
#include "memsifter/task.h"

namespace memsifter {

/// Strictly increasing positive cutoffs starting at 1.
class CutoffSchedule {
 public:
  /// Throws InvalidArgument when the list is empty, does not start at 1, or
  /// is not strictly increasing.
  explicit CutoffSchedule(std::vector<std::size_t> cutoffs);

  std::span<const std::size_t> cutoffs() const { return cutoffs_; }
  std::size_t size() const { return cutoffs_.size(); }
  std::size_t back() const { return cutoffs_.back(); }

  friend bool operator==(const CutoffSchedule&, const CutoffSchedule&) = default;

 private:
  std::vector<std::size_t> cutoffs_;
};

/// Distinct Fibonacci numbers 1, 2, 3, 5, 8, ... not above `list_len`, plus
/// `list_len` itself when `include_full` and it is not already present.
CutoffSchedule fibonacci_cutoffs(std::size_t list_len, bool include_full = true);

/// 1 / log2(k + 1). Throws InvalidArgument for k < 1.
double discount(std::size_t k);

struct WeightVector {
  std::vector<double> discounts;
  std::vector<double> weights;
};

WeightVector weights(const CutoffSchedule& schedule);

struct AblationScores {
  double s0 = 0.0;
  /// One score per cutoff, aligned with the schedule.
  std::vector<double> at_cutoff;
};

/// Weighted-sum form: -D_1 * s0 + sum w_n * s_{k_n}.
double outcome_reward(const AblationScores& scores, const CutoffSchedule& schedule);
/// Marginal form: sum D_n * (s_{k_n} - s_{k_{n-1}}) with s_{k_0} = s0. Kept as
/// an independent cross-check of outcome_reward.
double outcome_reward_marginal(const AblationScores& scores, const CutoffSchedule& schedule);

/// Scores an answer against the gold answers, in [0, 1].
using AnswerScorer = std::function<double(std::string_view answer, std::span<const std::string> golds)>;

/// Extractive-QA style normalisation: lowercase, punctuation removed,
/// articles (a, an, the) dropped, whitespace collapsed.
std::string normalize_answer(std::string_view text);
/// Token F1 after normalize_answer, max over golds.
double score_answer_f1(std::string_view pred, std::span<const std::string> golds);
/// 1 if the normalised prediction equals some normalised gold, else 0.
double score_exact_match(std::string_view pred, std::span<const std::string> golds);

struct AblationOptions {
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  int max_concurrency = 4;
};

/// Scores the working LLM with no memory and at every cutoff. Calls run
/// concurrently up to options.max_concurrency; results are assembled by
/// cutoff index. A backend failure is rethrown as BackendError carrying the
/// index of the failing cutoff (0 = the no-memory baseline, n = k_n).
AblationScores evaluate_ablation(const Task& task, const RankingResult& ranking, const CutoffSchedule& schedule,
                                 const MemoryBank& bank, ChatBackend& working, const AnswerScorer& scorer,
                                 const AblationOptions& options = {});

/// NDCG@k with binary gains against `gold_ids`; 0 when gold is empty.
double retrieval_reward_ndcg(std::span<const std::int64_t> ranked_ids, const std::set<std::int64_t>& gold_ids,
                             std::size_t k);
/// |gold in top k| / |gold|; 0 when gold is empty.
double recall_at_k(std::span<const std::int64_t> ranked_ids, const std::set<std::int64_t>& gold_ids, std::size_t k);

struct AnnealConfig {
  double beta0 = 0.5;
  std::int64_t anneal_steps = 1;
};

/// beta0 * max(0, 1 - step / anneal_steps).
double anneal_beta(std::int64_t step, const AnnealConfig& cfg);

struct RewardBreakdown {
  double r_ans = 0.0;
  std::optional<double> r_ret;
  double alpha = 1.0;
  double beta = 0.0;
  double r_total = 0.0;
  AblationScores scores;
  std::vector<std::size_t> cutoffs;
  WeightVector weights;
};

/// Throws InvalidArgument for negative alpha/beta or beta > 0 without r_ret.
RewardBreakdown hybrid_reward(double r_ans, std::optional<double> r_ret, double alpha, double beta);

void to_json(nlohmann::json& j, const RewardBreakdown& r);
void from_json(const nlohmann::json& j, RewardBreakdown& r);

struct RewardOptions {
  bool include_full = true;
  double alpha = 1.0;
  AnnealConfig anneal;
  std::int64_t step = 0;
  AblationOptions ablation;
};

/// Schedule over the ranking length, ablation, R_ans, NDCG (when the task has
/// gold sessions) and the annealed hybrid. The NDCG cutoff is the ranking
/// length.
RewardBreakdown compute_reward(const Task& task, const RankingResult& ranking, ChatBackend& working,
                               const AnswerScorer& scorer, const RewardOptions& options = {});

}  // namespace memsifter
