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

#include "cli.h"

#include <algorithm>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "memsifter/bench.h"
#include "memsifter/errors.h"
#include "memsifter/http_backend.h"
#include "memsifter/memory_store.h"
#include "memsifter/mock_backends.h"
#include "memsifter/ranker.h"
#include "memsifter/reward.h"
#include "memsifter/training.h"
#include "text_util.h"

namespace memsifter::cli {

using nlohmann::json;

namespace {

struct Backends {
  std::shared_ptr<ChatBackend> proxy;
  std::shared_ptr<ChatBackend> working;
  std::shared_ptr<EmbeddingBackend> embedder;
};

HttpEndpoint endpoint(const std::string& base, const EndpointConfig& ep, const EnvLookup& env) {
  HttpEndpoint out;
  out.base_url = base;
  out.api_key = env("MEMSIFTER_API_KEY").value_or("");
  out.model = ep.model;
  out.timeout_ms = ep.policy.timeout_ms;
  return out;
}

Backends live_backends(const PipelineConfig& cfg, const EnvLookup& env) {
  if (cfg.api_base.empty()) throw ConfigError("api_base", "required unless --mock is given");
  const std::string embed_base = cfg.embed_base.empty() ? cfg.api_base : cfg.embed_base;
  Backends b;
  b.proxy = std::make_shared<RetryingChatBackend>(
      std::make_shared<HttpChatBackend>(endpoint(cfg.api_base, cfg.proxy, env)), cfg.proxy.policy, cfg.seed);
  b.working = std::make_shared<RetryingChatBackend>(
      std::make_shared<HttpChatBackend>(endpoint(cfg.api_base, cfg.working, env)), cfg.working.policy, cfg.seed + 1);
  b.embedder = std::make_shared<RetryingEmbeddingBackend>(
      std::make_shared<HttpEmbeddingBackend>(endpoint(embed_base, cfg.embedding, env)), cfg.embedding.policy,
      cfg.seed + 2);
  return b;
}

std::vector<OracleWorkingLlm::Fact> oracle_facts(std::span<const Task> tasks) {
  std::vector<OracleWorkingLlm::Fact> facts;
  for (const Task& t : tasks) {
    if (!t.gold_session_ids) continue;
    facts.push_back({t.question, *t.gold_session_ids, t.gold_answers.front()});
  }
  return facts;
}

Backends mock_backends(const PipelineConfig& cfg, std::span<const Task> tasks, bool worst_first) {
  Backends b;
  b.proxy = std::make_shared<OverlapRankingProxy>(
      cfg.top_k, worst_first ? OverlapRankingProxy::Order::kWorstFirst : OverlapRankingProxy::Order::kBestFirst);
  b.working = std::make_shared<OracleWorkingLlm>(oracle_facts(tasks));
  b.embedder = std::make_shared<HashingEmbedder>(4096, cfg.seed);
  return b;
}

RankOptions rank_options(const PipelineConfig& cfg, double temperature) {
  RankOptions o;
  o.prefilter = {cfg.prefilter_enabled, cfg.proxy_context_budget_tokens};
  o.top_k = cfg.top_k;
  o.model = cfg.proxy.model;
  o.temperature = temperature;
  return o;
}

RewardOptions reward_options(const PipelineConfig& cfg, std::size_t task_count, std::int64_t step) {
  RewardOptions o;
  o.include_full = cfg.include_full_cutoff;
  o.alpha = cfg.alpha;
  o.anneal = {cfg.beta0, cfg.resolved_anneal_steps(task_count)};
  o.step = step;
  o.ablation.model = cfg.working.model;
  o.ablation.temperature = cfg.working_temperature;
  o.ablation.max_concurrency = cfg.working.policy.max_concurrency;
  return o;
}

const Task& find_task(std::span<const Task> tasks, const std::string& id) {
  for (const Task& t : tasks) {
    if (t.task_id == id) return t;
  }
  throw InvalidArgument("task '" + id + "' not found in dataset");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"MemSifter memory retrieval engine", "memsifter"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Config file (key = value lines, [table] sections)");
  app.add_option("--set", overrides, "Override one config key, e.g. --set top_k=5")->take_all();

  auto* ingest = app.add_subcommand("ingest", "Segment a JSONL history into a memory bank");
  std::string history_path, bank_out, policy_name = "markers";
  std::int64_t max_gap = 3600;
  std::size_t turns_per_session = 1;
  ingest->add_option("--history", history_path, "History JSONL")->required();
  ingest->add_option("--out", bank_out, "Output bank JSONL")->required();
  ingest->add_option("--policy", policy_name, "markers | time-gap | fixed")
      ->check(CLI::IsMember({"markers", "time-gap", "fixed"}));
  ingest->add_option("--max-gap", max_gap, "Seconds between turns that start a new session (time-gap)");
  ingest->add_option("--turns-per-session", turns_per_session, "Session size (fixed)");

  auto* rank_cmd = app.add_subcommand("rank", "Rank a bank's sessions against a query");
  std::string bank_path, query;
  bool rank_mock = false, rank_trace = false;
  rank_cmd->add_option("--bank", bank_path, "Bank JSONL")->required();
  rank_cmd->add_option("--query", query, "Current chat context")->required();
  rank_cmd->add_flag("--mock", rank_mock, "Keyword-overlap proxy and hashing embedder");
  rank_cmd->add_flag("--trace", rank_trace, "Include prompt and pre-filter details");

  auto* reward_cmd = app.add_subcommand("reward", "Score a ranking with the ablation reward");
  std::string dataset_path, task_id;
  std::vector<std::int64_t> ranked_ids;
  bool mock_oracle = false;
  std::int64_t step = 0;
  reward_cmd->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  reward_cmd->add_option("--task-id", task_id, "Task to score")->required();
  reward_cmd->add_option("--ids", ranked_ids, "Ranked session ids, comma separated")->required()->delimiter(',');
  reward_cmd->add_flag("--mock-oracle", mock_oracle, "Use the oracle working LLM");
  reward_cmd->add_option("--step", step, "Training step for beta annealing");

  auto* schedule_cmd = app.add_subcommand("schedule", "Print cutoffs, discounts and weights");
  std::size_t list_len = 10;
  bool no_full = false;
  schedule_cmd->add_option("--list-len", list_len, "Ranked list length")->required();
  schedule_cmd->add_flag("--no-full", no_full, "Do not append the full list length");

  auto* curriculum_cmd = app.add_subcommand("curriculum", "Pick tasks near the target difficulty");
  std::string perf_path;
  std::optional<double> tau;
  std::optional<std::size_t> budget;
  curriculum_cmd->add_option("--perf", perf_path, "JSON object task_id -> performance")->required();
  curriculum_cmd->add_option("--tau", tau, "Target performance");
  curriculum_cmd->add_option("--budget", budget, "Number of tasks to select");

  auto* adv_cmd = app.add_subcommand("advantages", "Group-relative advantages of one rollout group");
  std::vector<double> rewards;
  adv_cmd->add_option("--rewards", rewards, "Rewards, comma separated")->required()->delimiter(',');

  auto* merge_cmd = app.add_subcommand("merge", "Average checkpoints elementwise");
  std::vector<std::string> ckpts;
  std::vector<double> scores;
  std::string merge_out;
  merge_cmd->add_option("checkpoints", ckpts, "Checkpoint JSON files")->required();
  merge_cmd->add_option("--out", merge_out, "Merged checkpoint path")->required();
  merge_cmd->add_option("--scores", scores, "Validation scores; keeps the best merge_top_k")->delimiter(',');

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic distractor benchmark");
  SyntheticConfig syn;
  std::string gen_out;
  gen_cmd->add_option("--out", gen_out, "Dataset JSONL")->required();
  gen_cmd->add_option("--n-tasks", syn.n_tasks);
  gen_cmd->add_option("--n-sessions", syn.n_sessions);
  gen_cmd->add_option("--n-gold", syn.n_gold);
  gen_cmd->add_option("--distractor-ratio", syn.distractor_ratio);
  gen_cmd->add_option("--padding-turns", syn.padding_turns);
  gen_cmd->add_option("--seed", syn.seed);

  auto* eval_cmd = app.add_subcommand("eval", "Rank, answer and score every task of a dataset");
  bool eval_mock = false, eval_reward = false;
  std::string proxy_kind = "overlap";
  std::string csv_path, traj_path;
  eval_cmd->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  eval_cmd->add_flag("--mock", eval_mock, "Deterministic mock backends");
  eval_cmd->add_option("--proxy", proxy_kind, "Mock proxy: overlap | worst")
      ->check(CLI::IsMember({"overlap", "worst"}));
  eval_cmd->add_flag("--reward", eval_reward, "Also compute the ablation reward per task");
  eval_cmd->add_option("--step", step, "Training step for beta annealing");
  eval_cmd->add_option("--csv", csv_path, "Write per-task rows as CSV");
  eval_cmd->add_option("--trajectories", traj_path, "Collect rollout groups and write them as JSONL");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    PipelineConfig cfg = load_config(config_path ? std::optional<std::filesystem::path>(*config_path) : std::nullopt,
                                     env);
    if (!overrides.empty()) {
      std::string text;
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(o, "--set expects key=value");
        text += o.substr(0, eq) + " = " + o.substr(eq + 1) + "\n";
      }
      cfg = parse_config(text, cfg);
    }

    if (ingest->parsed()) {
      SegmentationPolicy policy = segmentation::BoundaryMarkers{};
      if (policy_name == "time-gap") policy = segmentation::TimeGap{max_gap};
      if (policy_name == "fixed") policy = segmentation::FixedSize{turns_per_session};
      const auto entries = load_history(history_path);
      const MemoryBank bank = segment_history(entries, policy);
      save_bank(bank, bank_out);
      emit(out, {{"sessions", bank.size()}, {"total_tokens", bank.total_tokens()}, {"path", bank_out}});
      return kExitOk;
    }

    if (rank_cmd->parsed()) {
      const MemoryBank bank = load_bank(bank_path);
      Backends b = rank_mock ? mock_backends(cfg, {}, false) : live_backends(cfg, env);
      const RankTrace trace =
          rank_with_trace(query, bank, rank_options(cfg, 0.0), *b.proxy, cfg.prefilter_enabled ? b.embedder.get() : nullptr);
      json j = trace.result;
      if (rank_trace) {
        j["prompt"] = trace.prompt;
        j["attempts"] = trace.attempts;
        std::vector<std::int64_t> kept;
        for (const auto& s : trace.filtered.kept) kept.push_back(s.session->id);
        j["prefilter"] = {{"kept", kept},
                          {"dropped", trace.filtered.dropped_ids},
                          {"budget_tokens", trace.filtered.budget_tokens},
                          {"warnings", trace.filtered.warnings}};
      }
      emit(out, j);
      return kExitOk;
    }

    if (reward_cmd->parsed()) {
      const auto tasks = load_dataset(dataset_path);
      const Task& task = find_task(tasks, task_id);
      Backends b = mock_oracle ? mock_backends(cfg, tasks, false) : live_backends(cfg, env);
      RankingResult ranking;
      ranking.ranked_ids = ranked_ids;
      const RewardBreakdown r =
          compute_reward(task, ranking, *b.working, scorer_for(cfg.scorer), reward_options(cfg, tasks.size(), step));
      emit(out, r);
      return kExitOk;
    }

    if (schedule_cmd->parsed()) {
      const CutoffSchedule s = fibonacci_cutoffs(list_len, !no_full);
      const WeightVector w = weights(s);
      emit(out, {{"cutoffs", std::vector<std::size_t>(s.cutoffs().begin(), s.cutoffs().end())},
                 {"discounts", w.discounts},
                 {"weights", w.weights}});
      return kExitOk;
    }

    if (curriculum_cmd->parsed()) {
      std::map<std::string, double> perf;
      try {
        perf = json::parse(text::read_file(perf_path)).get<std::map<std::string, double>>();
      } catch (const json::exception& e) {
        throw ParseError(0, perf_path + ": " + e.what());
      }
      CurriculumConfig cc{tau.value_or(cfg.tau), budget.value_or(cfg.batch_size)};
      emit(out, {{"selected", select_curriculum(perf, cc)}});
      return kExitOk;
    }

    if (adv_cmd->parsed()) {
      emit(out, {{"advantages", grpo_advantages(rewards, cfg.eps_std)}});
      return kExitOk;
    }

    if (merge_cmd->parsed()) {
      std::vector<std::string> chosen = ckpts;
      if (!scores.empty()) {
        if (scores.size() != ckpts.size()) throw InvalidArgument("--scores needs one value per checkpoint");
        chosen.clear();
        for (std::size_t i : top_k_checkpoints(scores, cfg.merge_top_k)) chosen.push_back(ckpts[i]);
      }
      std::vector<ParamMap> maps;
      for (const auto& p : chosen) maps.push_back(load_param_map(p));
      const ParamMap merged = merge_checkpoints(maps);
      save_param_map(merged, merge_out);
      emit(out, {{"merged", chosen}, {"entries", merged.entries.size()}, {"path", merge_out}});
      return kExitOk;
    }

    if (gen_cmd->parsed()) {
      const auto tasks = generate_synthetic(syn);
      save_dataset(tasks, gen_out);
      emit(out, {{"tasks", tasks.size()}, {"path", gen_out}});
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const auto tasks = load_dataset(dataset_path);
      Backends b = eval_mock ? mock_backends(cfg, tasks, proxy_kind == "worst") : live_backends(cfg, env);
      EvalBackends eb{b.proxy.get(), b.working.get(), cfg.prefilter_enabled ? b.embedder.get() : nullptr};
      const EvalReport report = run_eval(tasks, cfg, eb, EvalOptions{eval_reward, step});
      json j = report_to_json(report);
      if (!csv_path.empty()) text::write_file(csv_path, report_rows_csv(report));
      if (!traj_path.empty()) {
        RolloutOptions ro;
        ro.group_size = cfg.grpo_group_size;
        ro.rank = rank_options(cfg, cfg.proxy_temperature);
        ro.reward = reward_options(cfg, tasks.size(), step);
        std::vector<RolloutGroup> groups;
        for (const Task& t : tasks) {
          RolloutGroup g = collect_rollouts(t, *b.proxy, eb.embedder, *b.working, scorer_for(cfg.scorer), ro);
          if (g.rollouts.size() >= 2) assign_advantages(g, cfg.eps_std);
          groups.push_back(std::move(g));
        }
        const std::size_t kept = filter_groups(groups, cfg.eps_std).size();
        j["trajectories"] = {{"path", traj_path},
                             {"records", export_trajectories(groups, traj_path)},
                             {"groups", groups.size()},
                             {"groups_with_signal", kept}};
      }
      err << "eval: " << report.success_count << "/" << report.rows.size() << " tasks succeeded\n";
      emit(out, j);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace memsifter::cli
