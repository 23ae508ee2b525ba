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

#include "memsifter/memory_store.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "memsifter/errors.h"
#include "text_util.h"

namespace memsifter {

using nlohmann::json;

const char* role_name(Role role) {
  switch (role) {
    case Role::kUser:
      return "user";
    case Role::kAssistant:
      return "assistant";
    case Role::kTool:
      return "tool";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "user") return Role::kUser;
  if (name == "assistant") return Role::kAssistant;
  if (name == "tool") return Role::kTool;
  throw InvalidArgument("unknown role '" + std::string(name) + "'");
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

Session Session::create(std::int64_t id, std::vector<Turn> turns, const TokenEstimator& estimator) {
  if (id < 0) throw IntegrityError("session id must be non-negative, got " + std::to_string(id));
  if (turns.empty()) throw IntegrityError("session " + std::to_string(id) + " has no turns");
  for (const Turn& t : turns) {
    if (text::trim(t.content).empty()) {
      throw IntegrityError("session " + std::to_string(id) + " contains a turn with empty content");
    }
  }
  Session s;
  s.id = id;
  s.turns = std::move(turns);
  s.token_count = estimator(render_session(s));
  return s;
}

MemoryBank MemoryBank::create(std::vector<Session> sessions, std::optional<std::string> source) {
  std::unordered_set<std::int64_t> seen;
  for (const Session& s : sessions) {
    if (s.id < 0) throw IntegrityError("session id must be non-negative, got " + std::to_string(s.id));
    if (s.turns.empty()) throw IntegrityError("session " + std::to_string(s.id) + " has no turns");
    if (!seen.insert(s.id).second) throw IntegrityError("duplicate session id " + std::to_string(s.id));
  }
  MemoryBank bank;
  bank.sessions_ = std::move(sessions);
  bank.source_ = std::move(source);
  return bank;
}

std::size_t MemoryBank::total_tokens() const {
  std::size_t total = 0;
  for (const Session& s : sessions_) total += s.token_count;
  return total;
}

const Session* MemoryBank::find(std::int64_t id) const {
  auto it = std::find_if(sessions_.begin(), sessions_.end(),
                         [id](const Session& s) { return s.id == id; });
  return it == sessions_.end() ? nullptr : &*it;
}

std::set<std::int64_t> MemoryBank::ids() const {
  std::set<std::int64_t> out;
  for (const Session& s : sessions_) out.insert(s.id);
  return out;
}

namespace {

struct Segmenter {
  std::span<const HistoryEntry> entries;

  std::vector<std::vector<Turn>> operator()(const segmentation::BoundaryMarkers&) const {
    std::vector<std::vector<Turn>> groups;
    for (const HistoryEntry& e : entries) {
      if (groups.empty() || e.starts_session) groups.emplace_back();
      groups.back().push_back(e.turn);
    }
    return groups;
  }

  std::vector<std::vector<Turn>> operator()(const segmentation::TimeGap& gap) const {
    if (gap.max_gap_seconds < 0) throw InvalidArgument("time gap must be non-negative");
    std::vector<std::vector<Turn>> groups;
    std::optional<std::int64_t> last;
    for (const HistoryEntry& e : entries) {
      const auto& ts = e.turn.timestamp;
      if (groups.empty() || (ts && last && *ts - *last > gap.max_gap_seconds)) groups.emplace_back();
      groups.back().push_back(e.turn);
      if (ts) last = ts;
    }
    return groups;
  }

  std::vector<std::vector<Turn>> operator()(const segmentation::FixedSize& fixed) const {
    if (fixed.turns_per_session == 0) throw InvalidArgument("fixed-size policy needs a positive size");
    std::vector<std::vector<Turn>> groups;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i % fixed.turns_per_session == 0) groups.emplace_back();
      groups.back().push_back(entries[i].turn);
    }
    return groups;
  }
};

}  // namespace

MemoryBank segment_history(std::span<const HistoryEntry> entries, const SegmentationPolicy& policy) {
  if (entries.empty()) throw EmptyHistory();
  auto groups = std::visit(Segmenter{entries}, policy);
  std::vector<Session> sessions;
  sessions.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    sessions.push_back(Session::create(static_cast<std::int64_t>(i), std::move(groups[i])));
  }
  return MemoryBank::create(std::move(sessions));
}

std::string render_session(const Session& session) {
  std::string out = "<session " + std::to_string(session.id) + ">\n";
  for (const Turn& t : session.turns) {
    out += role_name(t.role);
    out += ": ";
    out += t.content;
    out += '\n';
  }
  out += "</session>";
  return out;
}

std::string render_sessions(std::span<const Session* const> sessions) {
  std::string out;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    if (i > 0) out += '\n';
    out += render_session(*sessions[i]);
  }
  return out;
}

std::string render_sessions(const MemoryBank& bank) {
  std::vector<const Session*> ptrs;
  ptrs.reserve(bank.size());
  for (const Session& s : bank.sessions()) ptrs.push_back(&s);
  return render_sessions(ptrs);
}

std::vector<std::int64_t> parse_session_tags(std::string_view text) {
  static constexpr std::string_view kOpen = "<session";
  std::vector<std::int64_t> ids;
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
    std::size_t i = pos + kOpen.size();
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t digits_begin = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i > digits_begin && i < text.size() && text[i] == '>' && i - digits_begin <= 18) {
      ids.push_back(std::stoll(std::string(text.substr(digits_begin, i - digits_begin))));
    }
    pos = i;
  }
  return ids;
}

namespace {

json turn_to_json(const Turn& t) {
  json j;
  j["role"] = role_name(t.role);
  j["content"] = t.content;
  j["timestamp"] = t.timestamp ? json(*t.timestamp) : json(nullptr);
  return j;
}

Turn turn_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("turn must be an object");
  Turn t;
  t.role = parse_role(j.at("role").get<std::string>());
  t.content = j.at("content").get<std::string>();
  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) {
    t.timestamp = it->get<std::int64_t>();
  }
  return t;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!text::trim(line).empty()) fn(line_no, line);
    start = end + 1;
  }
}

}  // namespace

std::string bank_to_jsonl(const MemoryBank& bank) {
  std::string out;
  for (const Session& s : bank.sessions()) {
    json j;
    j["id"] = s.id;
    j["turns"] = json::array();
    for (const Turn& t : s.turns) j["turns"].push_back(turn_to_json(t));
    out += j.dump();
    out += '\n';
  }
  return out;
}

MemoryBank bank_from_jsonl(std::string_view text, std::optional<std::string> source_name) {
  std::vector<Session> sessions;
  std::unordered_set<std::int64_t> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::int64_t id = 0;
    std::vector<Turn> turns;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw InvalidArgument("expected a JSON object");
      id = j.at("id").get<std::int64_t>();
      const json& jt = j.at("turns");
      if (!jt.is_array()) throw InvalidArgument("'turns' must be an array");
      for (const json& t : jt) turns.push_back(turn_from_json(t));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
    if (!seen.insert(id).second) {
      throw IntegrityError("line " + std::to_string(line_no) + ": duplicate session id " + std::to_string(id));
    }
    sessions.push_back(Session::create(id, std::move(turns)));
  });
  return MemoryBank::create(std::move(sessions), std::move(source_name));
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << bank_to_jsonl(bank);
  if (!out) throw IoError("write failed for " + path.string());
}

MemoryBank load_bank(const std::filesystem::path& path) {
  return bank_from_jsonl(text::read_file(path), path.filename().string());
}

std::vector<HistoryEntry> load_history(const std::filesystem::path& path) {
  const std::string text = text::read_file(path);
  std::vector<HistoryEntry> entries;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    try {
      const json j = json::parse(line);
      HistoryEntry e;
      e.turn = turn_from_json(j);
      e.starts_session = j.value("new_session", false);
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, e.what());
    }
  });
  return entries;
}

}  // namespace memsifter
