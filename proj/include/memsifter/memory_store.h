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

// Raw interaction history organised as identifier-tagged sessions.
//
// A MemoryBank is append-only history: it is built once (by segmentation or
// by loading a bank file) and never mutated afterwards, so a single instance
// can be shared freely between threads.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace memsifter {

enum class Role { kUser, kAssistant, kTool };

const char* role_name(Role role);
/// Throws InvalidArgument for anything other than "user", "assistant", "tool".
Role parse_role(std::string_view name);

struct Turn {
  Role role = Role::kUser;
  std::string content;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// Token budgeting hook. The default is the ceil(chars / 4) heuristic; an
/// exact tokenizer can be plugged in where a backend needs it.
using TokenEstimator = std::function<std::size_t(std::string_view)>;

std::size_t estimate_tokens(std::string_view text);

struct Session {
  std::int64_t id = 0;
  std::vector<Turn> turns;
  std::size_t token_count = 0;

  /// Validates the turns and fills token_count from the rendered form.
  static Session create(std::int64_t id, std::vector<Turn> turns,
                        const TokenEstimator& estimator = estimate_tokens);

  friend bool operator==(const Session&, const Session&) = default;
};

class MemoryBank {
 public:
  MemoryBank() = default;

  /// Throws IntegrityError on duplicate or negative ids and on empty sessions.
  static MemoryBank create(std::vector<Session> sessions,
                           std::optional<std::string> source = std::nullopt);

  std::span<const Session> sessions() const { return sessions_; }
  const std::optional<std::string>& source() const { return source_; }
  std::size_t size() const { return sessions_.size(); }
  bool empty() const { return sessions_.empty(); }
  std::size_t total_tokens() const;

  /// nullptr when the id is unknown.
  const Session* find(std::int64_t id) const;
  std::set<std::int64_t> ids() const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  std::vector<Session> sessions_;
  std::optional<std::string> source_;
};

/// One line of raw history handed to segmentation. `starts_session` is the
/// explicit boundary marker shipped with most benchmark data.
struct HistoryEntry {
  Turn turn;
  bool starts_session = false;
};

namespace segmentation {
struct BoundaryMarkers {};
/// Splits when consecutive timestamps differ by more than `max_gap_seconds`.
/// Turns without a timestamp continue the current session.
struct TimeGap {
  std::int64_t max_gap_seconds = 3600;
};
struct FixedSize {
  std::size_t turns_per_session = 1;
};
}  // namespace segmentation

using SegmentationPolicy =
    std::variant<segmentation::BoundaryMarkers, segmentation::TimeGap, segmentation::FixedSize>;

/// Partitions the history into sessions with ids 0..N-1 in order.
/// Throws EmptyHistory on empty input.
MemoryBank segment_history(std::span<const HistoryEntry> entries, const SegmentationPolicy& policy);

/// `<session I>` followed by one `role: content` line per turn and `</session>`.
std::string render_session(const Session& session);
/// Sessions rendered in bank order, separated by a newline.
std::string render_sessions(const MemoryBank& bank);
std::string render_sessions(std::span<const Session* const> sessions);

/// Ids of every `<session I>` opener in `text`, in order of appearance.
/// Accepts both `<session 3>` and `<session3>`.
std::vector<std::int64_t> parse_session_tags(std::string_view text);

// Bank files are JSON lines, one session per line.
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);
std::string bank_to_jsonl(const MemoryBank& bank);
/// `source_name` is used for the bank's source label.
MemoryBank bank_from_jsonl(std::string_view text, std::optional<std::string> source_name = std::nullopt);

/// History file: JSON lines of `{"role", "content", "timestamp"?, "new_session"?}`.
std::vector<HistoryEntry> load_history(const std::filesystem::path& path);

}  // namespace memsifter
