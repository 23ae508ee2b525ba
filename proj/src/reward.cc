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

#include "memsifter/reward.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "memsifter/errors.h"
#include "parallel.h"

namespace memsifter {

using nlohmann::json;

CutoffSchedule::CutoffSchedule(std::vector<std::size_t> cutoffs) : cutoffs_(std::move(cutoffs)) {
  if (cutoffs_.empty()) throw InvalidArgument("cutoff schedule is empty");
  if (cutoffs_.front() != 1) throw InvalidArgument("cutoff schedule must start at 1");
  for (std::size_t i = 1; i < cutoffs_.size(); ++i) {
    if (cutoffs_[i] <= cutoffs_[i - 1]) throw InvalidArgument("cutoff schedule must be strictly increasing");
  }
}

CutoffSchedule fibonacci_cutoffs(std::size_t list_len, bool include_full) {
  if (list_len < 1) throw InvalidArgument("list_len must be >= 1");
  std::vector<std::size_t> out;
  // 1, 2, 3, 5, 8, ... (the duplicate leading 1 is skipped).
  std::size_t a = 1, b = 2;
  while (a <= list_len) {
    out.push_back(a);
    const std::size_t next = a + b;
    a = b;
    b = next;
  }
  if (include_full && out.back() != list_len) out.push_back(list_len);
  return CutoffSchedule(std::move(out));
}

double discount(std::size_t k) {
  if (k < 1) throw InvalidArgument("discount needs k >= 1");
  return 1.0 / std::log2(static_cast<double>(k) + 1.0);
}

WeightVector weights(const CutoffSchedule& schedule) {
  WeightVector out;
  for (std::size_t k : schedule.cutoffs()) out.discounts.push_back(discount(k));
  const std::size_t n = out.discounts.size();
  out.weights.resize(n);
  for (std::size_t i = 0; i + 1 < n; ++i) out.weights[i] = out.discounts[i] - out.discounts[i + 1];
  out.weights[n - 1] = out.discounts[n - 1];
  return out;
}

namespace {

void check_aligned(const AblationScores& scores, const CutoffSchedule& schedule) {
  if (scores.at_cutoff.size() != schedule.size()) {
    throw InvalidArgument("got " + std::to_string(scores.at_cutoff.size()) + " scores for " +
                          std::to_string(schedule.size()) + " cutoffs");
  }
}

}  // namespace

double outcome_reward(const AblationScores& scores, const CutoffSchedule& schedule) {
  check_aligned(scores, schedule);
  const WeightVector w = weights(schedule);
  double r = -w.discounts.front() * scores.s0;
  for (std::size_t i = 0; i < w.weights.size(); ++i) r += w.weights[i] * scores.at_cutoff[i];
  return r;
}

double outcome_reward_marginal(const AblationScores& scores, const CutoffSchedule& schedule) {
  check_aligned(scores, schedule);
  double r = 0.0;
  double prev = scores.s0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    r += discount(schedule.cutoffs()[i]) * (scores.at_cutoff[i] - prev);
    prev = scores.at_cutoff[i];
  }
  return r;
}

std::string normalize_answer(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    lowered.push_back(std::isspace(c) ? ' ' : static_cast<char>(std::tolower(c)));
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < lowered.size()) {
    while (pos < lowered.size() && lowered[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < lowered.size() && lowered[end] != ' ') ++end;
    if (end > pos) {
      const std::string_view word(lowered.data() + pos, end - pos);
      if (word != "a" && word != "an" && word != "the") {
        if (!out.empty()) out += ' ';
        out.append(word);
      }
    }
    pos = end;
  }
  return out;
}

namespace {

std::vector<std::string> split_tokens(const std::string& normalized) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < normalized.size()) {
    std::size_t end = normalized.find(' ', pos);
    if (end == std::string::npos) end = normalized.size();
    if (end > pos) out.push_back(normalized.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string_view, int> counts;
  for (const auto& t : gold) ++counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double score_answer_f1(std::string_view pred, std::span<const std::string> golds) {
  if (golds.empty()) throw InvalidArgument("score_answer_f1 needs at least one gold answer");
  const auto pred_tokens = split_tokens(normalize_answer(pred));
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, token_f1(pred_tokens, split_tokens(normalize_answer(g))));
  return best;
}

double score_exact_match(std::string_view pred, std::span<const std::string> golds) {
  if (golds.empty()) throw InvalidArgument("score_exact_match needs at least one gold answer");
  const std::string p = normalize_answer(pred);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1.0;
  }
  return 0.0;
}

AblationScores evaluate_ablation(const Task& task, const RankingResult& ranking, const CutoffSchedule& schedule,
                                 const MemoryBank& bank, ChatBackend& working, const AnswerScorer& scorer,
                                 const AblationOptions& options) {
  if (ranking.ranked_ids.empty()) throw InvalidArgument("ablation needs a non-empty ranking");
  if (schedule.back() > ranking.ranked_ids.size()) {
    throw InvalidArgument("cutoff " + std::to_string(schedule.back()) + " exceeds ranking length " +
                          std::to_string(ranking.ranked_ids.size()));
  }
  for (std::int64_t id : ranking.ranked_ids) {
    if (bank.find(id) == nullptr) throw InvalidArgument("ranked id " + std::to_string(id) + " is not in the bank");
  }

  // Slot 0 is the no-memory baseline, slot n the n-th cutoff.
  std::vector<double> scores(schedule.size() + 1, 0.0);
  detail::parallel_for(scores.size(), options.max_concurrency, [&](std::size_t slot) {
    const std::size_t k = slot == 0 ? 0 : schedule.cutoffs()[slot - 1];
    const auto sessions = top_sessions(bank, ranking.ranked_ids, k);
    ChatRequest request = ChatRequest::user(build_answer_prompt(task.question, sessions), options.model,
                                            options.temperature);
    request.max_output_tokens = options.max_output_tokens;
    try {
      const std::string answer = working.complete(request);
      scores[slot] = std::clamp(scorer(answer, task.gold_answers), 0.0, 1.0);
    } catch (BackendError& e) {
      e.set_cutoff_index(slot);
      throw;
    }
  });

  AblationScores out;
  out.s0 = scores.front();
  out.at_cutoff.assign(scores.begin() + 1, scores.end());
  return out;
}

double retrieval_reward_ndcg(std::span<const std::int64_t> ranked_ids, const std::set<std::int64_t>& gold_ids,
                             std::size_t k) {
  if (k < 1) throw InvalidArgument("ndcg needs k >= 1");
  if (gold_ids.empty()) return 0.0;
  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranked_ids.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (gold_ids.contains(ranked_ids[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, gold_ids.size());
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double recall_at_k(std::span<const std::int64_t> ranked_ids, const std::set<std::int64_t>& gold_ids, std::size_t k) {
  if (gold_ids.empty()) return 0.0;
  std::set<std::int64_t> hit;
  for (std::size_t i = 0; i < std::min(k, ranked_ids.size()); ++i) {
    if (gold_ids.contains(ranked_ids[i])) hit.insert(ranked_ids[i]);
  }
  return static_cast<double>(hit.size()) / static_cast<double>(gold_ids.size());
}

double anneal_beta(std::int64_t step, const AnnealConfig& cfg) {
  if (step < 0) throw InvalidArgument("step must be >= 0");
  if (cfg.anneal_steps < 1) throw InvalidArgument("anneal_steps must be >= 1");
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.anneal_steps);
  return cfg.beta0 * std::max(0.0, 1.0 - frac);
}

RewardBreakdown hybrid_reward(double r_ans, std::optional<double> r_ret, double alpha, double beta) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InvalidArgument("alpha and beta must be >= 0");
  if (beta > 0.0 && !r_ret) throw InvalidArgument("beta > 0 requires a retrieval reward");
  RewardBreakdown out;
  out.r_ans = r_ans;
  out.r_ret = r_ret;
  out.alpha = alpha;
  out.beta = beta;
  out.r_total = alpha * r_ans + beta * r_ret.value_or(0.0);
  return out;
}

void to_json(json& j, const RewardBreakdown& r) {
  j = json::object();
  j["r_ans"] = r.r_ans;
  j["r_ret"] = r.r_ret ? json(*r.r_ret) : json(nullptr);
  j["alpha"] = r.alpha;
  j["beta"] = r.beta;
  j["r_total"] = r.r_total;
  j["scores"] = {{"s0", r.scores.s0}, {"at_cutoff", r.scores.at_cutoff}};
  j["cutoffs"] = r.cutoffs;
  j["weights"] = {{"discounts", r.weights.discounts}, {"weights", r.weights.weights}};
}

void from_json(const json& j, RewardBreakdown& r) {
  r.r_ans = j.at("r_ans").get<double>();
  r.r_ret = j.at("r_ret").is_null() ? std::nullopt : std::optional<double>(j.at("r_ret").get<double>());
  r.alpha = j.at("alpha").get<double>();
  r.beta = j.at("beta").get<double>();
  r.r_total = j.at("r_total").get<double>();
  r.scores.s0 = j.at("scores").at("s0").get<double>();
  r.scores.at_cutoff = j.at("scores").at("at_cutoff").get<std::vector<double>>();
  r.cutoffs = j.at("cutoffs").get<std::vector<std::size_t>>();
  r.weights.discounts = j.at("weights").at("discounts").get<std::vector<double>>();
  r.weights.weights = j.at("weights").at("weights").get<std::vector<double>>();
}

RewardBreakdown compute_reward(const Task& task, const RankingResult& ranking, ChatBackend& working,
                               const AnswerScorer& scorer, const RewardOptions& options) {
  if (!task.bank) throw InvalidArgument("task " + task.task_id + " has no memory bank");
  const CutoffSchedule schedule = fibonacci_cutoffs(ranking.ranked_ids.size(), options.include_full);
  AblationScores scores = evaluate_ablation(task, ranking, schedule, *task.bank, working, scorer, options.ablation);
  const double r_ans = outcome_reward(scores, schedule);
  std::optional<double> r_ret;
  if (task.gold_session_ids) {
    r_ret = retrieval_reward_ndcg(ranking.ranked_ids, *task.gold_session_ids, ranking.ranked_ids.size());
  }
  RewardBreakdown out = hybrid_reward(r_ans, r_ret, options.alpha, anneal_beta(options.step, options.anneal));
  out.scores = std::move(scores);
  out.cutoffs.assign(schedule.cutoffs().begin(), schedule.cutoffs().end());
  out.weights = weights(schedule);
  return out;
}

}  // namespace memsifter
