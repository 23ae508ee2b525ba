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

#include "memsifter/ranker.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

#include "text_util.h"

namespace memsifter {

namespace detail {
extern const std::string_view kThinkAndRankPrompt;
}  // namespace detail

namespace {

constexpr std::string_view kHistory = "{HISTORY}";
constexpr std::string_view kContext = "{CONTEXT}";
constexpr std::string_view kTopK = "{TOP_K}";

std::size_t count_of(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

// Contents between the last `close` tag and the nearest `open` before it.
std::optional<std::string_view> last_block(std::string_view raw, std::string_view open, std::string_view close) {
  const std::size_t end = raw.rfind(close);
  if (end == std::string_view::npos) return std::nullopt;
  const std::size_t begin = raw.rfind(open, end);
  if (begin == std::string_view::npos) return std::nullopt;
  return raw.substr(begin + open.size(), end - begin - open.size());
}

bool all_digits(std::string_view s) {
  return !s.empty() && s.size() <= 18 &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

const char* repair_name(Repair r) {
  switch (r) {
    case Repair::kDeduped:
      return "deduped";
    case Repair::kTruncated:
      return "truncated";
    case Repair::kPaddedNone:
      return "padded_none";
    case Repair::kWhitespaceNormalized:
      return "whitespace_normalized";
    case Repair::kDroppedInvalid:
      return "dropped_invalid";
  }
  return "unknown";
}

namespace {

Repair parse_repair(std::string_view name) {
  for (Repair r : {Repair::kDeduped, Repair::kTruncated, Repair::kPaddedNone, Repair::kWhitespaceNormalized,
                   Repair::kDroppedInvalid}) {
    if (name == repair_name(r)) return r;
  }
  throw InvalidArgument("unknown repair '" + std::string(name) + "'");
}

std::string join_repairs(const std::vector<Repair>& repairs) {
  std::string out;
  for (Repair r : repairs) {
    if (!out.empty()) out += ", ";
    out += repair_name(r);
  }
  return out;
}

}  // namespace

FormatError::FormatError(std::vector<Repair> repairs)
    : Error("ranking output needs repairs: " + join_repairs(repairs)), repairs_(std::move(repairs)) {}

PromptTemplate::PromptTemplate(std::string name, std::string body) : name_(std::move(name)), body_(std::move(body)) {
  if (count_of(body_, kHistory) != 1) throw TemplateError("template '" + name_ + "' needs exactly one {HISTORY}");
  if (count_of(body_, kContext) != 1) throw TemplateError("template '" + name_ + "' needs exactly one {CONTEXT}");
  if (count_of(body_, kTopK) < 1) throw TemplateError("template '" + name_ + "' needs a {TOP_K} placeholder");
}

const PromptTemplate& PromptTemplate::think_and_rank() {
  static const PromptTemplate kTemplate("think_and_rank", std::string(detail::kThinkAndRankPrompt));
  return kTemplate;
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  return PromptTemplate(path.stem().string(), text::read_file(path));
}

void to_json(nlohmann::json& j, const RankingResult& r) {
  j = nlohmann::json::object();
  j["rationale"] = r.rationale;
  j["ranked_ids"] = r.ranked_ids;
  j["raw_output"] = r.raw_output;
  j["repairs"] = nlohmann::json::array();
  for (Repair rep : r.repairs) j["repairs"].push_back(repair_name(rep));
}

void from_json(const nlohmann::json& j, RankingResult& r) {
  r.rationale = j.value("rationale", std::string());
  r.ranked_ids = j.at("ranked_ids").get<std::vector<std::int64_t>>();
  r.raw_output = j.value("raw_output", std::string());
  r.repairs.clear();
  if (auto it = j.find("repairs"); it != j.end()) {
    for (const auto& name : *it) r.repairs.push_back(parse_repair(name.get<std::string>()));
  }
}

std::string build_prompt(std::string_view query, const FilteredBank& filtered, const PromptTemplate& tmpl,
                         std::size_t top_k) {
  if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  const std::string history = render_sessions(filtered.kept_in_bank_order());
  const std::string k = std::to_string(top_k);
  const std::string_view body = tmpl.body();
  std::string out;
  out.reserve(body.size() + history.size() + query.size());
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t brace = body.find('{', pos);
    if (brace == std::string_view::npos) {
      out.append(body.substr(pos));
      break;
    }
    out.append(body.substr(pos, brace - pos));
    const std::string_view rest = body.substr(brace);
    if (rest.starts_with(kHistory)) {
      out += history;
      pos = brace + kHistory.size();
    } else if (rest.starts_with(kContext)) {
      out.append(query);
      pos = brace + kContext.size();
    } else if (rest.starts_with(kTopK)) {
      out += k;
      pos = brace + kTopK.size();
    } else {
      out += '{';
      pos = brace + 1;
    }
  }
  return out;
}

RankingResult parse_ranking(std::string_view raw, const std::set<std::int64_t>& valid_ids, std::size_t top_k,
                            bool strict) {
  if (valid_ids.empty()) throw InvalidArgument("valid_ids must be non-empty");
  if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  const auto block = last_block(raw, "<ranking>", "</ranking>");
  if (!block) throw MissingRankingError();

  RankingResult result;
  result.raw_output = std::string(raw);
  if (auto think = last_block(raw, "<think>", "</think>")) result.rationale = std::string(*think);

  auto note = [&](Repair r) {
    if (std::find(result.repairs.begin(), result.repairs.end(), r) == result.repairs.end()) {
      result.repairs.push_back(r);
    }
  };

  const std::string_view inner = *block;
  if (!text::trim(inner).empty()) {
    std::unordered_set<std::int64_t> seen;
    std::size_t start = 0;
    while (start <= inner.size()) {
      std::size_t comma = inner.find(',', start);
      if (comma == std::string_view::npos) comma = inner.size();
      const std::string_view token = inner.substr(start, comma - start);
      const std::string_view trimmed = text::trim(token);
      if (trimmed.size() != token.size()) note(Repair::kWhitespaceNormalized);
      if (!all_digits(trimmed)) {
        note(Repair::kDroppedInvalid);
      } else if (const std::int64_t id = std::stoll(std::string(trimmed)); !valid_ids.contains(id)) {
        note(Repair::kDroppedInvalid);
      } else if (!seen.insert(id).second) {
        note(Repair::kDeduped);
      } else {
        result.ranked_ids.push_back(id);
      }
      start = comma + 1;
    }
  } else if (!inner.empty()) {
    note(Repair::kWhitespaceNormalized);
  }

  if (result.ranked_ids.size() > top_k) {
    result.ranked_ids.resize(top_k);
    note(Repair::kTruncated);
  }
  if (result.ranked_ids.empty()) note(Repair::kPaddedNone);
  if (strict && !result.repairs.empty()) throw FormatError(result.repairs);
  return result;
}

RankTrace rank_with_trace(std::string_view query, const MemoryBank& bank, const RankOptions& options,
                          ChatBackend& proxy, EmbeddingBackend* embedder, const PromptTemplate& tmpl) {
  if (bank.empty()) throw InvalidArgument("cannot rank an empty bank");
  RankTrace trace;
  if (options.prefilter.enabled) {
    if (embedder == nullptr) throw InvalidArgument("prefilter enabled but no embedding backend supplied");
    trace.filtered = prefilter(query, bank, options.prefilter.budget_tokens, *embedder);
  } else {
    trace.filtered = keep_all(bank, options.prefilter.budget_tokens);
  }
  trace.prompt = build_prompt(query, trace.filtered, tmpl, options.top_k);

  std::set<std::int64_t> valid;
  for (const auto& k : trace.filtered.kept) valid.insert(k.session->id);

  ChatRequest request = ChatRequest::user(trace.prompt, options.model, options.temperature);
  request.max_output_tokens = options.max_output_tokens;
  for (int attempt = 1;; ++attempt) {
    trace.attempts = attempt;
    const std::string raw = proxy.complete(request);
    try {
      trace.result = parse_ranking(raw, valid, options.top_k, options.strict);
      return trace;
    } catch (const MissingRankingError&) {
      if (attempt >= 2) throw;
    }
  }
}

RankingResult rank(std::string_view query, const MemoryBank& bank, const RankOptions& options, ChatBackend& proxy,
                   EmbeddingBackend* embedder, const PromptTemplate& tmpl) {
  return rank_with_trace(query, bank, options, proxy, embedder, tmpl).result;
}

std::string build_answer_prompt(std::string_view question, std::span<const Session* const> sessions) {
  std::string out;
  if (!sessions.empty()) {
    out += "Relevant memory from earlier sessions:\n";
    out += render_sessions(sessions);
    out += "\n\n";
  }
  out += "Task: ";
  out.append(question);
  out += "\nAnswer the task concisely.";
  return out;
}

std::vector<const Session*> top_sessions(const MemoryBank& bank, std::span<const std::int64_t> ranked_ids,
                                         std::size_t count) {
  std::vector<const Session*> out;
  for (std::size_t i = 0; i < ranked_ids.size() && out.size() < count; ++i) {
    if (const Session* s = bank.find(ranked_ids[i])) out.push_back(s);
  }
  return out;
}

}  // namespace memsifter
