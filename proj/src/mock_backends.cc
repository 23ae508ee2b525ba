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

#include "memsifter/mock_backends.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <thread>
#include <unordered_set>

#include "memsifter/memory_store.h"
#include "text_util.h"

namespace memsifter {

namespace {

const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> kWords = {
      "a",    "an",   "the",  "is",    "are",  "was",   "were", "be",   "been", "of",    "to",
      "in",   "on",   "at",   "for",   "and",  "or",    "but",  "my",   "your", "i",     "you",
      "me",   "we",   "it",   "its",   "this", "that",  "what", "which", "who", "how",   "do",
      "does", "did",  "with", "has",   "have", "had",   "can",  "about", "as",  "by",    "from",
      "if",   "so",   "not",  "no",    "yes",  "please", "tell", "there", "their", "they", "he",
      "she",  "his",  "her",  "them",  "our",  "us",    "am",   "will", "would", "could", "should"};
  return kWords;
}

constexpr std::string_view kHistoryMarker = "Historical Interaction Information:";
constexpr std::string_view kContextMarker = "Current Chat Context:";

struct Block {
  std::int64_t id;
  std::string_view body;
};

// `<session I>` ... `</session>` pairs, in order. Openers without a closer
// are skipped.
std::vector<Block> session_blocks(std::string_view text) {
  static constexpr std::string_view kOpen = "<session";
  static constexpr std::string_view kClose = "</session>";
  std::vector<Block> blocks;
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
    const std::size_t gt = text.find('>', pos);
    if (gt == std::string_view::npos) break;
    const auto ids = parse_session_tags(text.substr(pos, gt - pos + 1));
    if (ids.size() != 1) {
      pos += kOpen.size();
      continue;
    }
    const std::size_t close = text.find(kClose, gt);
    if (close == std::string_view::npos) break;
    blocks.push_back({ids.front(), text.substr(gt + 1, close - gt - 1)});
    pos = close + kClose.size();
  }
  return blocks;
}

}  // namespace

std::vector<std::string> keyword_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stop_words().contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::string ScriptedChatBackend::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (steps_.empty()) throw BackendError(FailureKind::kFatal, 0, "scripted backend exhausted");
  Step step = std::move(steps_.front());
  steps_.pop_front();
  if (auto* err = std::get_if<BackendError>(&step)) throw *err;
  return std::get<std::string>(std::move(step));
}

std::size_t ScriptedChatBackend::calls() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<ChatRequest> ScriptedChatBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<std::pair<std::int64_t, std::size_t>> OverlapRankingProxy::score_prompt(std::string_view prompt,
                                                                                    Order order) {
  std::string_view history = prompt;
  std::string_view context;
  const auto h = prompt.find(kHistoryMarker);
  const auto c = prompt.find(kContextMarker);
  if (h != std::string_view::npos && c != std::string_view::npos && h < c) {
    history = prompt.substr(h + kHistoryMarker.size(), c - h - kHistoryMarker.size());
    context = prompt.substr(c + kContextMarker.size());
    if (auto end = context.find("\n\n"); end != std::string_view::npos) context = context.substr(0, end);
  }

  const auto blocks = session_blocks(history);
  std::unordered_set<std::string> query;
  if (!context.empty()) {
    for (auto& t : keyword_tokens(context)) query.insert(std::move(t));
  } else {
    // No recognisable layout: everything outside the session blocks is query.
    std::string rest(prompt);
    for (const Block& b : blocks) {
      const auto at = rest.find(b.body);
      if (at != std::string::npos) rest.erase(at, b.body.size());
    }
    for (auto& t : keyword_tokens(rest)) query.insert(std::move(t));
  }

  std::vector<std::pair<std::int64_t, std::size_t>> scored;
  std::unordered_set<std::int64_t> seen;
  for (const Block& b : blocks) {
    if (!seen.insert(b.id).second) continue;
    std::unordered_set<std::string> words;
    for (auto& t : keyword_tokens(b.body)) words.insert(std::move(t));
    std::size_t overlap = 0;
    for (const auto& q : query) overlap += words.contains(q) ? 1 : 0;
    scored.emplace_back(b.id, overlap);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (order == Order::kWorstFirst) std::reverse(scored.begin(), scored.end());
  return scored;
}

std::string OverlapRankingProxy::complete(const ChatRequest& request) {
  validate(request);
  auto scored = score_prompt(request.joined_content(), order_);
  if (scored.size() > top_k_) scored.resize(top_k_);
  std::string think = "keyword overlap per session:";
  std::string ranking;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    think += " " + std::to_string(scored[i].first) + "=" + std::to_string(scored[i].second);
    if (i > 0) ranking += ',';
    ranking += std::to_string(scored[i].first);
  }
  return "<think>" + think + "</think><ranking>" + ranking + "</ranking>";
}

std::string oracle_answer(std::string_view context, const std::set<std::int64_t>& gold_ids,
                          std::string_view gold_answer) {
  for (std::int64_t id : parse_session_tags(context)) {
    if (gold_ids.contains(id)) return std::string(gold_answer);
  }
  return std::string(kOracleWrongAnswer);
}

std::string OracleWorkingLlm::complete(const ChatRequest& request) {
  validate(request);
  const std::string content = request.joined_content();
  const Fact* best = nullptr;
  for (const Fact& f : facts_) {
    if (content.find(f.question) != std::string::npos &&
        (best == nullptr || f.question.size() > best->question.size())) {
      best = &f;
    }
  }
  if (best == nullptr) return std::string(kOracleWrongAnswer);
  return oracle_answer(content, best->gold_ids, best->answer);
}

std::vector<Embedding> HashingEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed called with no texts");
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) {
    Embedding v(dimension_, 0.0f);
    for (const std::string& w : keyword_tokens(t)) {
      v[text::fnv1a(w, 0xcbf29ce484222325ULL ^ seed_) % dimension_] += 1.0f;
    }
    double norm = 0;
    for (float x : v) norm += static_cast<double>(x) * x;
    if (norm == 0.0) {
      zero_vectors_.fetch_add(1);
    } else {
      const double inv = 1.0 / std::sqrt(norm);
      for (float& x : v) x = static_cast<float>(x * inv);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Embedding> FunctionEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(fn_(t));
  return out;
}

std::string InFlightProbe::complete(const ChatRequest& request) {
  const int now = in_flight_.fetch_add(1) + 1;
  int prev = peak_.load();
  while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
  }
  std::this_thread::sleep_for(hold_);
  try {
    std::string out = inner_->complete(request);
    in_flight_.fetch_sub(1);
    return out;
  } catch (...) {
    in_flight_.fetch_sub(1);
    throw;
  }
}

}  // namespace memsifter
