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

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memsifter/memory_store.h"

namespace memsifter {

/// One question over one memory bank. Gold sessions are optional because
/// most real tasks carry only answers.
struct Task {
  std::string task_id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::optional<std::set<std::int64_t>> gold_session_ids;
  std::shared_ptr<const MemoryBank> bank;
  /// Set when the bank was referenced by path rather than inlined.
  std::optional<std::string> bank_path;
};

}  // namespace memsifter
