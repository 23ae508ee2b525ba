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

// Think-and-rank proxy: prompt assembly, the proxy call and parsing of the
// `<think>...</think><ranking>...</ranking>` answer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "memsifter/backends.h"
#include "memsifter/errors.h"
#include "memsifter/memory_store.h"
#include "memsifter/prefilter.h"

namespace memsifter {

/// Prompt body with {HISTORY}, {CONTEXT} and {TOP_K} placeholders. HISTORY
/// and CONTEXT occur exactly once; TOP_K at least once.
class PromptTemplate {
 public:
  /// Throws TemplateError when a placeholder count is wrong.
  PromptTemplate(std::string name, std::string body);

  /// The built-in think-and-rank ranking prompt.
  static const PromptTemplate& think_and_rank();
  static PromptTemplate from_file(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::string& body() const { return body_; }

 private:
  std::string name_;
  std::string body_;
};

struct RankingResult {
  std::string rationale;
  std::vector<std::int64_t> ranked_ids;
  std::string raw_output;
  std::vector<Repair> repairs;

  friend bool operator==(const RankingResult&, const RankingResult&) = default;
};

void to_json(nlohmann::json& j, const RankingResult& r);
void from_json(const nlohmann::json& j, RankingResult& r);

/// Single pass substitution; placeholder-like text inside substituted values
/// is left alone.
std::string build_prompt(std::string_view query, const FilteredBank& filtered, const PromptTemplate& tmpl,
                         std::size_t top_k);

/// Uses the last `<ranking>` block and the last `<think>` block. Lenient mode
/// repairs the id list (drops invalid tokens, de-duplicates keeping the first
/// occurrence, truncates to top_k) and records each repair; strict mode
/// throws FormatError when any repair would be needed. Both modes throw
/// MissingRankingError when there is no ranking block.
RankingResult parse_ranking(std::string_view raw, const std::set<std::int64_t>& valid_ids, std::size_t top_k,
                            bool strict = false);

struct RankOptions {
  PrefilterConfig prefilter;
  std::size_t top_k = 10;
  bool strict = false;
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 16384;
};

struct RankTrace {
  FilteredBank filtered;
  std::string prompt;
  RankingResult result;
  int attempts = 0;
};

/// prefilter -> build_prompt -> proxy -> parse_ranking. A missing ranking
/// block is retried once with the same prompt before it is surfaced.
/// `embedder` may be null when options.prefilter.enabled is false.
RankTrace rank_with_trace(std::string_view query, const MemoryBank& bank, const RankOptions& options,
                          ChatBackend& proxy, EmbeddingBackend* embedder,
                          const PromptTemplate& tmpl = PromptTemplate::think_and_rank());

RankingResult rank(std::string_view query, const MemoryBank& bank, const RankOptions& options, ChatBackend& proxy,
                   EmbeddingBackend* embedder, const PromptTemplate& tmpl = PromptTemplate::think_and_rank());

/// Working-LLM input: the given sessions (in the order supplied) followed by
/// the task. With no sessions only the task is sent.
std::string build_answer_prompt(std::string_view question, std::span<const Session* const> sessions);

/// Sessions of `bank` for the first `count` ids of `ranked_ids`; unknown ids
/// are skipped.
std::vector<const Session*> top_sessions(const MemoryBank& bank, std::span<const std::int64_t> ranked_ids,
                                         std::size_t count);

}  // namespace memsifter
