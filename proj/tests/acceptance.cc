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

// Acceptance run: one PASS / FAIL / SKIPPED line per criterion. Exits
// non-zero when any criterion fails. Criterion 10 talks to a real
// chat-completions endpoint and only runs when MEMSIFTER_LIVE_TEST is set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "memsifter/bench.h"
#include "memsifter/config.h"
#include "memsifter/errors.h"
#include "memsifter/http_backend.h"
#include "memsifter/mock_backends.h"
#include "memsifter/ranker.h"
#include "memsifter/reward.h"
#include "memsifter/training.h"
#include "oracles.h"

namespace memsifter {
namespace {

using Rng = std::mt19937_64;

enum class Status { kPass, kFail, kSkipped };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

/// Collects the first failed check of a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failure_.empty()) failure_ = what;
  }
  Outcome done(std::string detail) const {
    if (!failure_.empty()) return {Status::kFail, failure_};
    return {Status::kPass, std::move(detail)};
  }

 private:
  std::string failure_;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

CutoffSchedule random_schedule(Rng& rng) {
  std::vector<std::size_t> cutoffs = {1};
  const std::size_t n = 1 + below(rng, 8);
  while (cutoffs.size() < n) cutoffs.push_back(cutoffs.back() + 1 + below(rng, 12));
  return CutoffSchedule(std::move(cutoffs));
}

Outcome reward_identity() {
  Rng rng(1);
  Checker c;
  double worst = 0.0;
  const int cases = 5000;
  for (int i = 0; i < cases; ++i) {
    const CutoffSchedule schedule = random_schedule(rng);
    AblationScores s;
    s.s0 = uniform(rng);
    for (std::size_t n = 0; n < schedule.size(); ++n) s.at_cutoff.push_back(uniform(rng));
    const double gap = std::abs(outcome_reward(s, schedule) - outcome_reward_marginal(s, schedule));
    worst = std::max(worst, gap);
    c.expect(gap <= 1e-9, "case " + std::to_string(i) + " differs by " + num(gap));
  }
  return c.done(std::to_string(cases) + " random cases, max gap " + num(worst));
}

Outcome weight_laws() {
  Rng rng(2);
  Checker c;
  std::vector<CutoffSchedule> schedules;
  for (std::size_t len = 1; len <= 500; ++len) schedules.push_back(fibonacci_cutoffs(len));
  for (int i = 0; i < 2000; ++i) schedules.push_back(random_schedule(rng));
  for (const CutoffSchedule& s : schedules) {
    const WeightVector w = weights(s);
    const double sum = std::accumulate(w.weights.begin(), w.weights.end(), 0.0);
    c.expect(std::abs(sum - 1.0) <= 1e-12, "weights sum to " + num(sum));
    for (std::size_t n = 0; n < w.weights.size(); ++n) {
      c.expect(w.weights[n] > 0.0, "non-positive weight");
      if (n > 0) c.expect(w.discounts[n] < w.discounts[n - 1], "discounts not strictly decreasing");
    }
  }
  c.expect(discount(1) == 1.0, "D(1) = " + num(discount(1)));
  c.expect(discount(3) == 0.5, "D(3) = " + num(discount(3)));
  c.expect(std::abs(discount(2) - 0.630930) <= 1e-6, "D(2) = " + num(discount(2)));
  return c.done(std::to_string(schedules.size()) + " schedules; D(1)=1, D(2)=" + num(discount(2)) + ", D(3)=0.5");
}

Task eight_session_task(std::int64_t gold) {
  std::vector<Session> sessions;
  for (std::int64_t id = 0; id < 8; ++id) {
    sessions.push_back(Session::create(id, {Turn{Role::kUser, "session " + std::to_string(id) + " notes", {}}}));
  }
  Task t;
  t.task_id = "rank-sensitivity";
  t.question = "Which notebook did I lose?";
  t.gold_answers = {"the blue notebook"};
  t.gold_session_ids = std::set<std::int64_t>{gold};
  t.bank = std::make_shared<const MemoryBank>(MemoryBank::create(std::move(sessions)));
  return t;
}

Outcome rank_sensitivity() {
  Checker c;
  const CutoffSchedule schedule({1, 2, 3, 5, 8});
  const WeightVector w = weights(schedule);
  const std::int64_t gold = 5;
  const Task task = eight_session_task(gold);
  OracleWorkingLlm working({{task.question, {gold}, task.gold_answers[0]}});

  std::vector<double> by_rank;
  for (std::size_t rank = 1; rank <= 8; ++rank) {
    RankingResult ranking;
    for (std::int64_t id = 0; id < 8; ++id) {
      if (id != gold) ranking.ranked_ids.push_back(id);
    }
    ranking.ranked_ids.insert(ranking.ranked_ids.begin() + static_cast<std::ptrdiff_t>(rank - 1), gold);
    const AblationScores s =
        evaluate_ablation(task, ranking, schedule, *task.bank, working, score_exact_match, AblationOptions{});
    const double r = outcome_reward(s, schedule);
    by_rank.push_back(r);

    std::size_t tier = 0;
    while (schedule.cutoffs()[tier] < rank) ++tier;
    const double tail = std::accumulate(w.weights.begin() + static_cast<std::ptrdiff_t>(tier), w.weights.end(), 0.0);
    c.expect(std::abs(r - tail) <= 1e-12, "rank " + std::to_string(rank) + " reward " + num(r) + " != " + num(tail));
  }
  c.expect(by_rank[0] == 1.0, "rank 1 reward " + num(by_rank[0]));
  const std::size_t tiers[] = {1, 2, 3, 5, 8};
  for (std::size_t i = 1; i < 5; ++i) {
    c.expect(by_rank[tiers[i] - 1] < by_rank[tiers[i - 1] - 1],
             "rank " + std::to_string(tiers[i]) + " does not earn less than rank " + std::to_string(tiers[i - 1]));
  }
  for (std::size_t r = 1; r < 8; ++r) c.expect(by_rank[r] <= by_rank[r - 1], "reward rises with rank");
  const double last = 1.0 / std::log2(9.0);
  c.expect(std::abs(by_rank[7] - last) <= 1e-12, "rank 8 reward " + num(by_rank[7]));
  std::string trace;
  for (double r : by_rank) trace += (trace.empty() ? "" : ", ") + num(r);
  return c.done("ranks 1..8 -> " + trace);
}

Outcome zero_utility() {
  Checker c;
  Task task = eight_session_task(2);
  FixedChatBackend knows_it(task.gold_answers[0]);
  RankingResult ranking;
  ranking.ranked_ids = {2, 0, 1, 3, 4, 5, 6, 7};
  RewardOptions options;
  options.anneal = {0.0, 1};
  const RewardBreakdown r = compute_reward(task, ranking, knows_it, score_answer_f1, options);
  c.expect(r.scores.s0 == 1.0, "no-memory score " + num(r.scores.s0));
  c.expect(r.r_ans == 0.0, "R_ans = " + num(r.r_ans));
  const RewardBreakdown exact = compute_reward(task, ranking, knows_it, score_exact_match, options);
  c.expect(exact.r_ans == 0.0, "exact-match R_ans = " + num(exact.r_ans));
  return c.done("always-correct working LLM: s0=1, R_ans=" + num(r.r_ans));
}

Outcome ndcg_oracle() {
  Rng rng(5);
  Checker c;
  std::size_t checks = 0;
  for (int g = 0; g < 10; ++g) {
    std::set<std::int64_t> gold;
    const std::size_t n_gold = 1 + below(rng, 4);
    while (gold.size() < n_gold) gold.insert(static_cast<std::int64_t>(below(rng, 8)));
    std::vector<std::int64_t> perm = {0, 1, 2, 3, 4, 5};
    do {
      for (std::size_t len = 1; len <= perm.size(); ++len) {
        const std::vector<std::int64_t> ranked(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(len));
        for (std::size_t k = 1; k <= 7; ++k) {
          const double got = retrieval_reward_ndcg(ranked, gold, k);
          const double want = oracle::ndcg(ranked, gold, k);
          c.expect(std::abs(got - want) <= 1e-12, "NDCG@" + std::to_string(k) + " " + num(got) + " != " + num(want));
          c.expect(got >= 0.0 && got <= 1.0 + 1e-12, "NDCG out of [0, 1]");
          ++checks;
        }
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return c.done("720 permutations x 10 gold sets, " + std::to_string(checks) + " comparisons");
}

std::string prompt_example_output() {
  const std::string& body = PromptTemplate::think_and_rank().body();
  const std::string marker = "Example Output Format: ";
  const auto at = body.find(marker);
  if (at == std::string::npos) return "";
  const auto start = at + marker.size();
  const auto end = body.find('\n', start);
  return body.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

Outcome parser_robustness() {
  static const std::vector<std::string> pieces = {"<think>",  "</think>", "<ranking>", "</ranking>", ",",   " ",
                                                  "\n",       "abc",      "-1",        "0042",       "1.5", "<ranking",
                                                  "</rank>",  ",,",       "99999999999999999999999"};
  Rng rng(6);
  Checker c;
  std::size_t parsed = 0, missing = 0, strict_rejects = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string raw;
    const std::size_t n = below(rng, 30);
    for (std::size_t p = 0; p < n; ++p) {
      raw += below(rng, 3) == 0 ? std::to_string(below(rng, 20)) : pieces[below(rng, pieces.size())];
    }
    if (below(rng, 2) == 0) {
      raw += "<ranking>";
      const std::size_t m = below(rng, 16);
      for (std::size_t p = 0; p < m; ++p) {
        if (p > 0) raw += below(rng, 5) == 0 ? " , " : ",";
        raw += below(rng, 6) == 0 ? pieces[below(rng, pieces.size())] : std::to_string(below(rng, 25));
      }
      raw += "</ranking>";
    }
    std::set<std::int64_t> valid;
    const std::size_t n_valid = 1 + below(rng, 15);
    while (valid.size() < n_valid) valid.insert(static_cast<std::int64_t>(below(rng, 20)));
    const std::size_t top_k = 1 + below(rng, 12);
    const bool strict = below(rng, 4) == 0;
    try {
      const RankingResult r = parse_ranking(raw, valid, top_k, strict);
      const std::string violation = oracle::ranking_violation(r, valid, top_k);
      c.expect(violation.empty(), "output " + std::to_string(i) + ": " + violation);
      if (strict) c.expect(r.repairs.empty(), "strict parse reported repairs");
      ++parsed;
    } catch (const MissingRankingError&) {
      ++missing;
    } catch (const FormatError&) {
      c.expect(strict, "lenient parse raised FormatError");
      ++strict_rejects;
    } catch (const std::exception& e) {
      c.expect(false, std::string("unexpected exception: ") + e.what());
    }
  }
  const std::string example = prompt_example_output();
  c.expect(!example.empty(), "prompt asset carries no example output");
  std::set<std::int64_t> ids;
  for (std::int64_t id = 0; id < 50; ++id) ids.insert(id);
  const RankingResult fig = parse_ranking(example, ids, 10, true);
  c.expect(fig.ranked_ids == std::vector<std::int64_t>{27, 13, 34, 5, 12, 8, 21, 45, 6, 19},
           "example output did not parse to its 10 ids");
  return c.done("10000 fuzzed outputs (" + std::to_string(parsed) + " parsed, " + std::to_string(missing) +
                " missing block, " + std::to_string(strict_rejects) + " strict rejects); example -> 10 ids");
}

Outcome grpo_and_curriculum() {
  Rng rng(7);
  Checker c;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> rewards(2 + below(rng, 10));
    for (double& r : rewards) r = uniform(rng, -1, 1);
    const auto adv = grpo_advantages(rewards);
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(adv.size()));
    c.expect(std::abs(mean) <= 1e-9, "advantage mean " + num(mean));
    c.expect(std::abs(sd - 1.0) <= 1e-9, "advantage std " + num(sd));
  }
  for (int i = 0; i < 2000; ++i) {
    std::map<std::string, double> perf;
    const std::size_t n = 1 + below(rng, 30);
    for (std::size_t t = 0; t < n; ++t) perf["task" + std::to_string(below(rng, 60))] = static_cast<double>(below(rng, 21)) / 20.0;
    const double tau = static_cast<double>(below(rng, 21)) / 20.0;
    const std::size_t budget = 1 + below(rng, 35);
    c.expect(select_curriculum(perf, {tau, budget}) == oracle::curriculum(perf, tau, budget),
             "curriculum differs from sort oracle");
  }
  std::size_t flat_groups = 0, kept_groups = 0;
  for (int i = 0; i < 500; ++i) {
    std::vector<RolloutGroup> groups(1 + below(rng, 5));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      groups[g].task_id = "g" + std::to_string(g);
      const bool flat = below(rng, 2) == 0;
      const double base = uniform(rng);
      for (std::size_t r = 0; r < 6; ++r) {
        TrajectoryRecord rec;
        rec.task_id = groups[g].task_id;
        rec.reward = hybrid_reward(flat ? base : uniform(rng), std::nullopt, 1.0, 0.0);
        groups[g].rollouts.push_back(rec);
      }
      if (flat) ++flat_groups;
    }
    const auto kept = filter_groups(groups, 1e-8);
    for (const RolloutGroup& g : kept) c.expect(reward_std(g) > 1e-8, "zero-variance group survived");
    kept_groups += kept.size();
  }
  return c.done("2000 advantage groups, 2000 curricula, " + std::to_string(flat_groups) +
                " zero-variance groups filtered (" + std::to_string(kept_groups) + " kept)");
}

ParamMap random_params(Rng& rng) {
  ParamMap m;
  m.entries["encoder.weight"] = ParamTensor{{3, 4}, {}};
  m.entries["encoder.bias"] = ParamTensor{{4}, {}};
  m.entries["scale"] = ParamTensor{{}, {}};
  for (auto& [name, t] : m.entries) {
    std::int64_t size = 1;
    for (std::int64_t d : t.shape) size *= d;
    for (std::int64_t i = 0; i < size; ++i) t.values.push_back(static_cast<float>(uniform(rng, -4, 4)));
  }
  return m;
}

Outcome merge_laws() {
  Rng rng(8);
  Checker c;
  for (int i = 0; i < 500; ++i) {
    std::vector<ParamMap> maps(1 + below(rng, 6));
    for (ParamMap& m : maps) m = random_params(rng);
    const ParamMap merged = merge_checkpoints(maps);
    const std::vector<ParamMap> single = {maps[0]};
    c.expect(merge_checkpoints(single) == maps[0], "singleton merge is not the identity");
    std::vector<ParamMap> shuffled = maps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    c.expect(merge_checkpoints(shuffled) == merged, "merge depends on input order");
    for (const auto& [name, values] : oracle::mean_params(maps)) {
      const auto& got = merged.entries.at(name).values;
      for (std::size_t k = 0; k < values.size(); ++k) {
        c.expect(std::abs(got[k] - values[k]) <= 1e-5, name + " differs from the brute-force mean");
      }
    }
  }
  return c.done("500 random checkpoint sets: identity, permutation invariance, elementwise mean");
}

Outcome end_to_end() {
  Checker c;
  SyntheticConfig syn;
  syn.n_tasks = 50;
  syn.seed = 42;
  const auto tasks = generate_synthetic(syn);

  std::vector<OracleWorkingLlm::Fact> facts;
  std::size_t bank_tokens = 0;
  for (const Task& t : tasks) {
    facts.push_back({t.question, *t.gold_session_ids, t.gold_answers[0]});
    bank_tokens = std::max(bank_tokens, t.bank->total_tokens());
  }
  PipelineConfig cfg;
  cfg.proxy_context_budget_tokens = bank_tokens * 3 / 5;
  HashingEmbedder embedder;

  OracleWorkingLlm working_best(facts);
  OverlapRankingProxy best(cfg.top_k);
  const EvalReport good = run_eval(tasks, cfg, {&best, &working_best, &embedder});

  std::size_t dropped = 0;
  for (const Task& t : tasks) {
    RankOptions o;
    o.prefilter.budget_tokens = cfg.proxy_context_budget_tokens;
    OverlapRankingProxy probe(cfg.top_k);
    dropped += rank_with_trace(t.question, *t.bank, o, probe, &embedder).filtered.dropped_ids.size();
  }

  OracleWorkingLlm working_worst(facts);
  OverlapRankingProxy worst(cfg.top_k, OverlapRankingProxy::Order::kWorstFirst);
  const EvalReport bad = run_eval(tasks, cfg, {&worst, &working_worst, &embedder});

  c.expect(good.success_count == 50, std::to_string(good.success_count) + "/50 tasks succeeded");
  c.expect(good.mean_f1 == 1.0, "mean F1 " + num(good.mean_f1));
  c.expect(good.mean_ndcg_at_1 == 1.0, "mean ndcg@1 " + num(good.mean_ndcg_at_1.value_or(-1)));
  c.expect(bad.mean_ndcg_at_1 == 0.0, "worst-proxy ndcg@1 " + num(bad.mean_ndcg_at_1.value_or(-1)));
  c.expect(dropped > 0, "pre-filter budget never dropped a session");
  return c.done("50 tasks: F1=" + num(good.mean_f1) + " ndcg@1=" + num(good.mean_ndcg_at_1.value_or(-1)) +
                "; worst proxy ndcg@1=" + num(bad.mean_ndcg_at_1.value_or(-1)) + "; pre-filter dropped " +
                std::to_string(dropped) + " sessions at budget " + std::to_string(cfg.proxy_context_budget_tokens));
}

Outcome live_smoke() {
  if (std::getenv("MEMSIFTER_LIVE_TEST") == nullptr) return {Status::kSkipped, "set MEMSIFTER_LIVE_TEST=1 to run"};
  Checker c;
  const PipelineConfig cfg = load_config(std::nullopt);
  if (cfg.api_base.empty()) return {Status::kFail, "MEMSIFTER_API_BASE is not set"};
  const char* key = std::getenv("MEMSIFTER_API_KEY");
  auto endpoint = [&](const EndpointConfig& e) {
    return HttpEndpoint{cfg.api_base, key ? key : "", e.model, e.policy.timeout_ms};
  };
  RetryingChatBackend proxy(std::make_shared<HttpChatBackend>(endpoint(cfg.proxy)), cfg.proxy.policy);
  RetryingChatBackend working(std::make_shared<HttpChatBackend>(endpoint(cfg.working)), cfg.working.policy);

  Task task;
  task.task_id = "live";
  task.question = "What is the name of my cat?";
  task.gold_answers = {"Biscuit"};
  task.gold_session_ids = std::set<std::int64_t>{1};
  std::vector<Session> sessions;
  sessions.push_back(Session::create(0, {Turn{Role::kUser, "I am planning a trip to Lisbon in May.", {}}}));
  sessions.push_back(Session::create(1, {Turn{Role::kUser, "My cat is called Biscuit and loves boxes.", {}}}));
  sessions.push_back(Session::create(2, {Turn{Role::kUser, "Can you suggest a pasta recipe?", {}}}));
  task.bank = std::make_shared<const MemoryBank>(MemoryBank::create(std::move(sessions)));

  RankOptions ro;
  ro.prefilter.enabled = false;
  ro.top_k = 3;
  ro.model = cfg.proxy.model;
  const RankingResult ranking = rank(task.question, *task.bank, ro, proxy, nullptr);
  RewardOptions wo;
  wo.ablation.model = cfg.working.model;
  const RewardBreakdown reward = compute_reward(task, ranking, working, score_answer_f1, wo);
  c.expect(!ranking.ranked_ids.empty(), "proxy returned an empty ranking");
  std::string ids;
  for (std::int64_t id : ranking.ranked_ids) ids += (ids.empty() ? "" : ",") + std::to_string(id);
  return c.done("ranked [" + ids + "], R_ans=" + num(reward.r_ans) + ", r_total=" + num(reward.r_total));
}

}  // namespace
}  // namespace memsifter

int main() {
  using memsifter::Outcome;
  using memsifter::Status;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"reward identity", memsifter::reward_identity},
      {"weight laws", memsifter::weight_laws},
      {"rank sensitivity", memsifter::rank_sensitivity},
      {"zero-utility credit", memsifter::zero_utility},
      {"NDCG oracle equivalence", memsifter::ndcg_oracle},
      {"parser robustness", memsifter::parser_robustness},
      {"GRPO and curriculum oracles", memsifter::grpo_and_curriculum},
      {"merge laws", memsifter::merge_laws},
      {"end-to-end mock pipeline", memsifter::end_to_end},
      {"live smoke test", memsifter::live_smoke},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    const char* label = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIPPED";
    if (o.status == Status::kFail) ++failures;
    std::cout << "criterion " << (i + 1) << " " << label << "  " << criteria[i].first << ": " << o.detail << " ("
              << ms << " ms)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
