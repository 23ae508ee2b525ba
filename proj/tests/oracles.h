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

// Brute-force reference implementations. Each one is written straight from
// the metric or rule it checks, with no sharing of engine code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "memsifter/ranker.h"
#include "memsifter/training.h"

namespace memsifter::oracle {

/// DCG of binary gains over the first k positions divided by the DCG of an
/// ideal list holding every gold id first.
inline double ndcg(const std::vector<std::int64_t>& ranked, const std::set<std::int64_t>& gold, std::size_t k) {
  if (gold.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    if (gold.count(ranked[i]) > 0) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t i = 0; i < gold.size() && i < k; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

/// R_ans spelled out tier by tier: discounted improvement of each tier over
/// the one before it, starting from the no-memory score.
inline double outcome_reward(double s0, const std::vector<double>& at_cutoff, const std::vector<std::size_t>& cutoffs) {
  double total = 0.0;
  double previous = s0;
  for (std::size_t n = 0; n < cutoffs.size(); ++n) {
    total += (at_cutoff[n] - previous) / std::log2(static_cast<double>(cutoffs[n]) + 1.0);
    previous = at_cutoff[n];
  }
  return total;
}

/// Every task sorted by |perf - tau| then id; the first `budget` survive.
inline std::vector<std::string> curriculum(const std::map<std::string, double>& perf, double tau,
                                           std::size_t budget) {
  std::vector<std::pair<double, std::string>> all;
  for (const auto& [id, p] : perf) all.emplace_back(std::abs(p - tau), id);
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < all.size() && i < budget; ++i) out.push_back(all[i].second);
  return out;
}

/// Mean of every entry, accumulated in long double.
inline std::map<std::string, std::vector<double>> mean_params(const std::vector<ParamMap>& maps) {
  std::map<std::string, std::vector<double>> out;
  for (const auto& [name, tensor] : maps.front().entries) {
    std::vector<double> values(tensor.values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      long double sum = 0;
      for (const ParamMap& m : maps) sum += m.entries.at(name).values[i];
      values[i] = static_cast<double>(sum / static_cast<long double>(maps.size()));
    }
    out[name] = std::move(values);
  }
  return out;
}

/// Empty string when `r` satisfies the ranking invariants, otherwise a
/// description of the first violation.
inline std::string ranking_violation(const RankingResult& r, const std::set<std::int64_t>& valid, std::size_t top_k) {
  std::set<std::int64_t> seen;
  for (std::int64_t id : r.ranked_ids) {
    if (!valid.contains(id)) return "id " + std::to_string(id) + " not in the valid set";
    if (!seen.insert(id).second) return "duplicate id " + std::to_string(id);
  }
  if (r.ranked_ids.size() > std::min(top_k, valid.size())) return "longer than min(top_k, |valid|)";
  return "";
}

}  // namespace memsifter::oracle
