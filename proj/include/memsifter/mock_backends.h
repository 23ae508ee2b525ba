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

// Deterministic offline backends. Every mock is a pure function of its
// construction arguments and the request, so end-to-end transcripts are
// byte-stable across runs.

#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "memsifter/backends.h"
#include "memsifter/errors.h"

namespace memsifter {

/// Lowercased alphanumeric runs with a small English stop-word list removed.
std::vector<std::string> keyword_tokens(std::string_view text);

/// Plays back a fixed queue of responses or failures, one per call. Throws a
/// fatal BackendError once the queue is exhausted.
class ScriptedChatBackend : public ChatBackend {
 public:
  using Step = std::variant<std::string, BackendError>;

  explicit ScriptedChatBackend(std::vector<Step> steps) : steps_(steps.begin(), steps.end()) {}

  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::deque<Step> steps_;
  std::vector<ChatRequest> requests_;
};

/// Always returns the same text.
class FixedChatBackend : public ChatBackend {
 public:
  explicit FixedChatBackend(std::string text) : text_(std::move(text)) {}
  std::string complete(const ChatRequest&) override { return text_; }

 private:
  std::string text_;
};

/// Memory proxy stand-in: scores every session in the prompt's history by
/// the number of distinct query keywords it contains and emits a
/// think-and-rank answer. kWorstFirst reverses the order, which puts the
/// best-matching session last.
class OverlapRankingProxy : public ChatBackend {
 public:
  enum class Order { kBestFirst, kWorstFirst };

  explicit OverlapRankingProxy(std::size_t top_k = 10, Order order = Order::kBestFirst)
      : top_k_(top_k), order_(order) {}

  std::string complete(const ChatRequest& request) override;

  /// (session id, overlap) pairs in emitted order, before truncation.
  static std::vector<std::pair<std::int64_t, std::size_t>> score_prompt(std::string_view prompt, Order order);

 private:
  std::size_t top_k_;
  Order order_;
};

/// Answer the oracle working LLM gives: `gold_answer` iff the context
/// carries a `<session I>` tag for some gold id, otherwise kOracleWrongAnswer.
inline constexpr std::string_view kOracleWrongAnswer = "unknown";
std::string oracle_answer(std::string_view context, const std::set<std::int64_t>& gold_ids,
                          std::string_view gold_answer);

/// Working-LLM stand-in that knows the hidden gold sessions of each task. The
/// task is identified by its question appearing in the request.
class OracleWorkingLlm : public ChatBackend {
 public:
  struct Fact {
    std::string question;
    std::set<std::int64_t> gold_ids;
    std::string answer;
  };

  explicit OracleWorkingLlm(std::vector<Fact> facts) : facts_(std::move(facts)) {}

  std::string complete(const ChatRequest& request) override;

 private:
  std::vector<Fact> facts_;
};

/// Bag-of-words embedder: keyword counts hashed into `dimension` buckets and
/// L2-normalised. Text without keywords maps to the zero vector and is
/// counted in zero_vectors().
class HashingEmbedder : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(std::size_t dimension = 4096, std::uint64_t seed = 0)
      : dimension_(dimension), seed_(seed) {}

  std::vector<Embedding> embed(std::span<const std::string> texts) override;

  std::size_t dimension() const { return dimension_; }
  std::size_t zero_vectors() const { return zero_vectors_.load(); }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::atomic<std::size_t> zero_vectors_{0};
};

/// Embedder driven by a caller-supplied function.
class FunctionEmbedder : public EmbeddingBackend {
 public:
  explicit FunctionEmbedder(std::function<Embedding(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::function<Embedding(const std::string&)> fn_;
};

/// Wraps a backend and records the peak number of concurrent calls. Each call
/// holds its slot for `hold` so overlapping callers become observable.
class InFlightProbe : public ChatBackend {
 public:
  InFlightProbe(std::shared_ptr<ChatBackend> inner, std::chrono::milliseconds hold)
      : inner_(std::move(inner)), hold_(hold) {}

  std::string complete(const ChatRequest& request) override;

  int peak() const { return peak_.load(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::chrono::milliseconds hold_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
};

}  // namespace memsifter
