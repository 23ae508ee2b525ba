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

#include "memsifter/prefilter.h"

#include <algorithm>
#include <cmath>

#include "memsifter/errors.h"

namespace memsifter {

namespace {

bool zero_norm(const Embedding& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

}  // namespace

std::size_t FilteredBank::kept_tokens() const {
  std::size_t total = 0;
  for (const auto& k : kept) total += k.session->token_count;
  return total;
}

std::vector<const Session*> FilteredBank::kept_in_bank_order() const {
  std::vector<ScoredSession> ordered = kept;
  std::sort(ordered.begin(), ordered.end(),
            [](const ScoredSession& a, const ScoredSession& b) { return a.bank_position < b.bank_position; });
  std::vector<const Session*> out;
  out.reserve(ordered.size());
  for (const auto& k : ordered) out.push_back(k.session);
  return out;
}

bool FilteredBank::keeps(std::int64_t id) const {
  return std::any_of(kept.begin(), kept.end(), [id](const ScoredSession& k) { return k.session->id == id; });
}

FilteredBank keep_all(const MemoryBank& bank, std::size_t budget_tokens) {
  FilteredBank out;
  out.budget_tokens = budget_tokens;
  for (std::size_t i = 0; i < bank.size(); ++i) out.kept.push_back({&bank.sessions()[i], 0.0, i});
  return out;
}

FilteredBank prefilter(std::string_view query, const MemoryBank& bank, std::size_t budget_tokens,
                       EmbeddingBackend& embedder) {
  if (budget_tokens == 0) throw InvalidArgument("budget_tokens must be positive");
  if (bank.empty()) throw InvalidArgument("cannot prefilter an empty bank");

  std::vector<std::string> texts;
  texts.reserve(bank.size() + 1);
  texts.emplace_back(query);
  for (const Session& s : bank.sessions()) texts.push_back(render_session(s));
  const std::vector<Embedding> vectors = embedder.embed(texts);
  if (vectors.size() != texts.size()) {
    throw BackendError(FailureKind::kFatal, 0, "embedder returned " + std::to_string(vectors.size()) +
                                                   " vectors for " + std::to_string(texts.size()) + " texts");
  }

  FilteredBank out;
  out.budget_tokens = budget_tokens;
  const bool query_zero = zero_norm(vectors[0]);
  if (query_zero) out.warnings.push_back("query embedding has zero norm; all similarities set to 0");

  std::vector<ScoredSession> scored;
  scored.reserve(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const Session& s = bank.sessions()[i];
    const Embedding& v = vectors[i + 1];
    double sim = 0.0;
    if (zero_norm(v)) {
      out.warnings.push_back("session " + std::to_string(s.id) + " embedding has zero norm; similarity set to 0");
    } else if (!query_zero) {
      sim = cosine_similarity(vectors[0], v);
    }
    scored.push_back({&s, sim, i});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredSession& a, const ScoredSession& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.session->id < b.session->id;
  });

  if (bank.total_tokens() <= budget_tokens) {
    out.kept = std::move(scored);
    return out;
  }

  std::size_t used = 0;
  std::size_t take = 0;
  for (; take < scored.size(); ++take) {
    const std::size_t next = scored[take].session->token_count;
    if (used + next > budget_tokens) break;
    used += next;
  }
  take = std::max<std::size_t>(take, 1);
  out.kept.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take));
  for (std::size_t i = take; i < scored.size(); ++i) out.dropped_ids.push_back(scored[i].session->id);
  return out;
}

}  // namespace memsifter
