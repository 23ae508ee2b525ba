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

#include <gtest/gtest.h>

#include <sstream>

#include "memsifter/errors.h"
#include "memsifter/mock_backends.h"
#include "memsifter/training.h"
#include "test_support.h"

namespace memsifter {
namespace {

TEST(Curriculum, PicksClosestToTau) {
  const std::map<std::string, double> perf = {{"a", 0.1}, {"b", 0.25}, {"c", 0.9}};
  EXPECT_EQ(select_curriculum(perf, {0.2, 2}), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(select_curriculum(perf, {0.2, 10}), (std::vector<std::string>{"b", "a", "c"}));
}

TEST(Curriculum, TiesByTaskId) {
  const std::map<std::string, double> perf = {{"z", 0.75}, {"m", 0.25}};
  EXPECT_EQ(select_curriculum(perf, {0.5, 2}), (std::vector<std::string>{"m", "z"}));
}

TEST(Curriculum, Validation) {
  EXPECT_THROW(select_curriculum({{"a", 0.1}}, {0.2, 0}), InvalidArgument);
  EXPECT_THROW(select_curriculum({{"a", 0.1}}, {1.5, 1}), InvalidArgument);
  EXPECT_THROW(select_curriculum({}, {0.2, 1}), InvalidArgument);
}

RolloutGroup group_with(const std::string& id, const std::vector<double>& rewards) {
  RolloutGroup g;
  g.task_id = id;
  for (double r : rewards) {
    TrajectoryRecord rec;
    rec.task_id = id;
    rec.prompt = "p";
    rec.raw_output = "<ranking>1</ranking>";
    RankingResult ranking;
    ranking.ranked_ids = {1};
    ranking.raw_output = rec.raw_output;
    rec.ranking = ranking;
    rec.reward = hybrid_reward(r, std::nullopt, 1.0, 0.0);
    g.rollouts.push_back(rec);
  }
  return g;
}

TEST(FilterGroups, DropsZeroVariance) {
  const std::vector<RolloutGroup> groups = {group_with("flat", {1, 1, 1, 1, 1, 1}),
                                            group_with("mixed", {1, 0, 0, 1, 0, 0})};
  const auto kept = filter_groups(groups, 1e-8);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].task_id, "mixed");
  EXPECT_EQ(kept[0].rollouts.size(), 6u);
  EXPECT_TRUE(filter_groups({}, 1e-8).empty());
  EXPECT_THROW(filter_groups(groups, -1), InvalidArgument);
}

TEST(Advantages, Examples) {
  EXPECT_EQ(grpo_advantages(std::vector<double>{1, 0}), (std::vector<double>{1, -1}));
  EXPECT_EQ(grpo_advantages(std::vector<double>{0.5, 0.5, 0.5}), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(grpo_advantages(std::vector<double>{1}), InvalidArgument);
}

TEST(Advantages, AssignedToGroup) {
  RolloutGroup g = group_with("t", {1, 0});
  assign_advantages(g);
  EXPECT_EQ(g.rollouts[0].advantage, 1.0);
  EXPECT_EQ(g.rollouts[1].advantage, -1.0);
}

TEST(Trajectories, ExportCountsAndRoundTrips) {
  testing::TempDir dir;
  std::vector<RolloutGroup> groups = {group_with("a", {1, 0, 1, 0, 1, 0}), group_with("b", {0, 0, 0, 0, 0, 1})};
  for (auto& g : groups) assign_advantages(g);
  groups[1].rollouts[2].ranking.reset();
  groups[1].rollouts[2].failure_reason = "format: deduped";
  EXPECT_EQ(export_trajectories(groups, dir.file("t.jsonl")), 12u);

  const auto loaded = load_trajectories(dir.file("t.jsonl"));
  ASSERT_EQ(loaded.size(), 12u);
  EXPECT_EQ(loaded[0].task_id, "a");
  EXPECT_EQ(loaded[0].ranking, groups[0].rollouts[0].ranking);
  EXPECT_EQ(loaded[0].advantage, groups[0].rollouts[0].advantage);
  EXPECT_FALSE(loaded[8].ranking.has_value());
  EXPECT_EQ(loaded[8].failure_reason, "format: deduped");

  std::istringstream lines(testing::slurp(dir.file("t.jsonl")));
  std::string text;
  for (int i = 0; i < 9; ++i) std::getline(lines, text);
  const auto line = nlohmann::json::parse(text);
  EXPECT_TRUE(line["ranking"].is_null());
  EXPECT_TRUE(line["failure_reason"].is_string());
}

TEST(Trajectories, ExportToUnwritablePathIsIoError) {
  EXPECT_THROW(export_trajectories({}, "/nonexistent/dir/t.jsonl"), IoError);
}

ParamMap map_of(std::vector<float> w) {
  ParamMap m;
  m.entries["w"] = ParamTensor{{static_cast<std::int64_t>(w.size())}, std::move(w)};
  return m;
}

TEST(Merge, Examples) {
  const std::vector<ParamMap> two = {map_of({0, 2}), map_of({2, 4})};
  EXPECT_EQ(merge_checkpoints(two).entries.at("w").values, (std::vector<float>{1, 3}));
  const std::vector<ParamMap> one = {map_of({0.25f, -7})};
  EXPECT_EQ(merge_checkpoints(one), one[0]);
  const std::vector<ParamMap> same = {map_of({1.5f, 2}), map_of({1.5f, 2}), map_of({1.5f, 2})};
  EXPECT_EQ(merge_checkpoints(same), same[0]);
}

TEST(Merge, SignatureMismatchNamesEntry) {
  ParamMap a = map_of({1, 2});
  ParamMap b = map_of({1, 2, 3});
  try {
    merge_checkpoints(std::vector<ParamMap>{a, b});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.entry(), "w");
  }
  ParamMap c = map_of({1, 2});
  c.entries["extra"] = ParamTensor{{1}, {0}};
  EXPECT_THROW(merge_checkpoints(std::vector<ParamMap>{a, c}), ShapeError);
  EXPECT_THROW(merge_checkpoints({}), InvalidArgument);
}

TEST(Merge, ShapeProductChecked) {
  ParamMap bad;
  bad.entries["m"] = ParamTensor{{2, 2}, {1, 2, 3}};
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(ParamFile, RoundTrip) {
  testing::TempDir dir;
  ParamMap m;
  m.entries["layer.weight"] = ParamTensor{{2, 3}, {0.1f, 0.2f, 0.3f, -1e-7f, 3.4e38f, 0}};
  m.entries["bias"] = ParamTensor{{}, {5}};
  save_param_map(m, dir.file("ckpt.json"));
  EXPECT_EQ(load_param_map(dir.file("ckpt.json")), m);
}

TEST(ParamFile, MalformedIsParseError) {
  testing::TempDir dir;
  dir.write("bad.json", "{\"entries\": {\"w\": {\"shape\": [2]");
  EXPECT_THROW(load_param_map(dir.file("bad.json")), ParseError);
}

TEST(TopK, BestScoresFirst) {
  const std::vector<double> scores = {0.1, 0.9, 0.5, 0.9};
  EXPECT_EQ(top_k_checkpoints(scores, 3), (std::vector<std::size_t>{1, 3, 2}));
}

TEST(Rollouts, FormatFailuresGetZeroReward) {
  Task task;
  task.task_id = "t";
  task.question = "What is my cat called?";
  task.gold_answers = {"Biscuit"};
  task.gold_session_ids = std::set<std::int64_t>{1};
  task.bank = std::make_shared<const MemoryBank>(testing::bank_of({"tea", "My cat is called Biscuit."}));
  ScriptedChatBackend proxy({std::string("<ranking>1,0</ranking>"), std::string("<ranking>1, 1</ranking>"),
                             std::string("nothing")});
  OracleWorkingLlm oracle({{task.question, {1}, "Biscuit"}});
  RolloutOptions o;
  o.group_size = 3;
  o.rank.prefilter.enabled = false;
  o.reward.anneal = {0.0, 1};
  const RolloutGroup g = collect_rollouts(task, proxy, nullptr, oracle, score_answer_f1, o);
  ASSERT_EQ(g.rollouts.size(), 3u);
  EXPECT_NEAR(g.rollouts[0].reward.r_total, 1.0, 1e-12);
  EXPECT_FALSE(g.rollouts[1].ranking.has_value());
  EXPECT_TRUE(g.rollouts[1].failure_reason.has_value());
  EXPECT_DOUBLE_EQ(g.rollouts[1].reward.r_total, 0.0);
  EXPECT_FALSE(g.rollouts[2].ranking.has_value());
  EXPECT_DOUBLE_EQ(g.rollouts[2].reward.r_total, 0.0);
  EXPECT_FALSE(g.rollouts[0].advantage.has_value());
}

}  // namespace
}  // namespace memsifter
