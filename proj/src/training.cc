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

#include "memsifter/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "memsifter/errors.h"
#include "text_util.h"

namespace memsifter {

using nlohmann::json;

std::vector<std::string> select_curriculum(const std::map<std::string, double>& perf, const CurriculumConfig& cfg) {
  if (cfg.budget < 1) throw InvalidArgument("curriculum budget must be >= 1");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw InvalidArgument("tau must lie in [0, 1]");
  if (perf.empty()) throw InvalidArgument("curriculum needs at least one task");
  std::vector<std::pair<double, const std::string*>> ranked;
  ranked.reserve(perf.size());
  for (const auto& [id, score] : perf) ranked.emplace_back(std::abs(score - cfg.tau), &id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(cfg.budget, ranked.size()); ++i) out.push_back(*ranked[i].second);
  return out;
}

void to_json(json& j, const TrajectoryRecord& r) {
  j = json::object();
  j["task_id"] = r.task_id;
  j["prompt"] = r.prompt;
  j["raw_output"] = r.raw_output;
  j["ranking"] = r.ranking ? json(*r.ranking) : json(nullptr);
  j["failure_reason"] = r.failure_reason ? json(*r.failure_reason) : json(nullptr);
  j["reward"] = r.reward;
  j["advantage"] = r.advantage ? json(*r.advantage) : json(nullptr);
}

void from_json(const json& j, TrajectoryRecord& r) {
  r.task_id = j.at("task_id").get<std::string>();
  r.prompt = j.at("prompt").get<std::string>();
  r.raw_output = j.at("raw_output").get<std::string>();
  r.ranking = j.at("ranking").is_null() ? std::nullopt : std::optional(j.at("ranking").get<RankingResult>());
  r.failure_reason =
      j.at("failure_reason").is_null() ? std::nullopt : std::optional(j.at("failure_reason").get<std::string>());
  r.reward = j.at("reward").get<RewardBreakdown>();
  r.advantage = j.at("advantage").is_null() ? std::nullopt : std::optional(j.at("advantage").get<double>());
}

namespace {

std::pair<double, double> mean_and_std(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / n)};
}

std::vector<double> totals(const RolloutGroup& group) {
  std::vector<double> out;
  out.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) out.push_back(r.reward.r_total);
  return out;
}

}  // namespace

double reward_std(const RolloutGroup& group) {
  if (group.rollouts.empty()) return 0.0;
  const auto r = totals(group);
  return mean_and_std(r).second;
}

std::vector<RolloutGroup> filter_groups(std::span<const RolloutGroup> groups, double eps) {
  if (!(eps >= 0.0)) throw InvalidArgument("eps must be >= 0");
  std::vector<RolloutGroup> out;
  for (const auto& g : groups) {
    if (reward_std(g) > eps) out.push_back(g);
  }
  return out;
}

std::vector<double> grpo_advantages(std::span<const double> rewards, double eps) {
  if (rewards.size() < 2) throw InvalidArgument("GRPO advantages need at least 2 rewards");
  const auto [mean, std] = mean_and_std(rewards);
  std::vector<double> out(rewards.size(), 0.0);
  if (std <= eps) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std;
  return out;
}

void assign_advantages(RolloutGroup& group, double eps) {
  const auto adv = grpo_advantages(totals(group), eps);
  for (std::size_t i = 0; i < adv.size(); ++i) group.rollouts[i].advantage = adv[i];
}

std::size_t export_trajectories(std::span<const RolloutGroup> groups, const std::filesystem::path& path) {
  std::string out;
  std::size_t lines = 0;
  for (const auto& g : groups) {
    for (const auto& r : g.rollouts) {
      out += json(r).dump();
      out += '\n';
      ++lines;
    }
  }
  text::write_file(path, out);
  return lines;
}

std::vector<TrajectoryRecord> load_trajectories(const std::filesystem::path& path) {
  const std::string text = text::read_file(path);
  std::vector<TrajectoryRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line = text::trim(std::string_view(text).substr(start, end - start));
    if (!line.empty()) {
      try {
        out.push_back(json::parse(line).get<TrajectoryRecord>());
      } catch (const json::exception& e) {
        throw ParseError(line_no, e.what());
      } catch (const InvalidArgument& e) {
        throw ParseError(line_no, e.what());
      }
    }
    start = end + 1;
  }
  return out;
}

void ParamMap::validate() const {
  for (const auto& [name, t] : entries) {
    std::int64_t product = 1;
    for (std::int64_t d : t.shape) {
      if (d < 0) throw ShapeError(name, "negative dimension");
      product *= d;
    }
    if (static_cast<std::size_t>(product) != t.values.size()) {
      throw ShapeError(name, "shape product " + std::to_string(product) + " != " + std::to_string(t.values.size()) +
                                 " values");
    }
  }
}

ParamMap merge_checkpoints(std::span<const ParamMap> maps) {
  if (maps.empty()) throw InvalidArgument("merge needs at least one checkpoint");
  for (const auto& m : maps) m.validate();
  const ParamMap& first = maps.front();
  for (std::size_t i = 1; i < maps.size(); ++i) {
    const auto& other = maps[i].entries;
    for (const auto& [name, t] : first.entries) {
      auto it = other.find(name);
      if (it == other.end()) throw ShapeError(name, "missing from checkpoint " + std::to_string(i));
      if (it->second.shape != t.shape) throw ShapeError(name, "shape differs in checkpoint " + std::to_string(i));
    }
    for (const auto& [name, t] : other) {
      if (!first.entries.contains(name)) throw ShapeError(name, "missing from checkpoint 0");
    }
  }

  ParamMap out;
  std::vector<double> column(maps.size());
  for (const auto& [name, t] : first.entries) {
    ParamTensor merged;
    merged.shape = t.shape;
    merged.values.resize(t.values.size());
    std::vector<const std::vector<float>*> sources;
    for (const auto& m : maps) sources.push_back(&m.entries.at(name).values);
    for (std::size_t e = 0; e < t.values.size(); ++e) {
      for (std::size_t m = 0; m < maps.size(); ++m) column[m] = (*sources[m])[e];
      // Summed in value order so the result does not depend on input order.
      std::sort(column.begin(), column.end());
      const double sum = std::accumulate(column.begin(), column.end(), 0.0);
      merged.values[e] = static_cast<float>(sum / static_cast<double>(maps.size()));
    }
    out.entries.emplace(name, std::move(merged));
  }
  return out;
}

void to_json(json& j, const ParamMap& m) {
  j = json::object();
  j["entries"] = json::object();
  for (const auto& [name, t] : m.entries) j["entries"][name] = {{"shape", t.shape}, {"values", t.values}};
}

void from_json(const json& j, ParamMap& m) {
  m.entries.clear();
  for (const auto& [name, e] : j.at("entries").items()) {
    ParamTensor t;
    t.shape = e.at("shape").get<std::vector<std::int64_t>>();
    t.values = e.at("values").get<std::vector<float>>();
    m.entries.emplace(name, std::move(t));
  }
}

void save_param_map(const ParamMap& map, const std::filesystem::path& path) {
  map.validate();
  text::write_file(path, json(map).dump() + "\n");
}

ParamMap load_param_map(const std::filesystem::path& path) {
  ParamMap m;
  try {
    m = json::parse(text::read_file(path)).get<ParamMap>();
  } catch (const json::exception& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

std::vector<std::size_t> top_k_checkpoints(std::span<const double> validation_scores, std::size_t k) {
  std::vector<std::size_t> idx(validation_scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return validation_scores[a] > validation_scores[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

RolloutGroup collect_rollouts(const Task& task, ChatBackend& proxy, EmbeddingBackend* embedder,
                              ChatBackend& working, const AnswerScorer& scorer, const RolloutOptions& options) {
  if (!task.bank || task.bank->empty()) throw InvalidArgument("task " + task.task_id + " has no memory bank");
  if (options.group_size < 1) throw InvalidArgument("group_size must be >= 1");
  const MemoryBank& bank = *task.bank;
  FilteredBank filtered = options.rank.prefilter.enabled && embedder != nullptr
                              ? prefilter(task.question, bank, options.rank.prefilter.budget_tokens, *embedder)
                              : keep_all(bank, options.rank.prefilter.budget_tokens);
  const std::string prompt = build_prompt(task.question, filtered, PromptTemplate::think_and_rank(), options.rank.top_k);
  std::set<std::int64_t> valid;
  for (const auto& k : filtered.kept) valid.insert(k.session->id);

  ChatRequest request = ChatRequest::user(prompt, options.rank.model, options.rank.temperature);
  request.max_output_tokens = options.rank.max_output_tokens;

  RolloutGroup group;
  group.task_id = task.task_id;
  for (std::size_t i = 0; i < options.group_size; ++i) {
    TrajectoryRecord rec;
    rec.task_id = task.task_id;
    rec.prompt = prompt;
    rec.raw_output = proxy.complete(request);
    try {
      rec.ranking = parse_ranking(rec.raw_output, valid, options.rank.top_k, /*strict=*/true);
      rec.reward = compute_reward(task, *rec.ranking, working, scorer, options.reward);
    } catch (const FormatError& e) {
      rec.ranking.reset();
      rec.failure_reason = e.what();
      rec.reward = hybrid_reward(0.0, std::nullopt, options.reward.alpha, 0.0);
    } catch (const MissingRankingError& e) {
      rec.ranking.reset();
      rec.failure_reason = e.what();
      rec.reward = hybrid_reward(0.0, std::nullopt, options.reward.alpha, 0.0);
    }
    group.rollouts.push_back(std::move(rec));
  }
  return group;
}

}  // namespace memsifter
