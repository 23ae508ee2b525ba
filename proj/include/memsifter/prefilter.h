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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "memsifter/backends.h"
#include "memsifter/memory_store.h"

namespace memsifter {

struct ScoredSession {
  const Session* session = nullptr;
  double similarity = 0.0;
  /// Index of the session in the source bank.
  std::size_t bank_position = 0;
};

/// Coarse embedding pre-filter result. Points into the bank it was built
/// from, which must outlive it.
struct FilteredBank {
  std::vector<ScoredSession> kept;  // similarity descending, ties by lower id
  std::vector<std::int64_t> dropped_ids;
  std::size_t budget_tokens = 0;
  std::vector<std::string> warnings;

  std::size_t kept_tokens() const;
  /// Kept sessions in their original bank order.
  std::vector<const Session*> kept_in_bank_order() const;
  bool keeps(std::int64_t id) const;
};

struct PrefilterConfig {
  bool enabled = true;
  std::size_t budget_tokens = 131072;
};

/// Shrinks `bank` to `budget_tokens`. Under budget every session is kept;
/// otherwise sessions are taken greedily by descending cosine similarity to
/// `query` and the fill stops at the first one that does not fit. At least
/// one session is always kept.
FilteredBank prefilter(std::string_view query, const MemoryBank& bank, std::size_t budget_tokens,
                       EmbeddingBackend& embedder);

/// Every session kept in bank order with similarity 0; used when filtering
/// is switched off.
FilteredBank keep_all(const MemoryBank& bank, std::size_t budget_tokens);

}  // namespace memsifter
