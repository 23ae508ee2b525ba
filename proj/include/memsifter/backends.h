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

// Contracts for chat-completion and embedding providers.
//
// Two roles go through ChatBackend: the memory proxy that emits the
// think-and-rank output and the working LLM that answers the task. Both are
// plain request/response; retry, concurrency limiting and caching are
// decorators layered on top of any implementation.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace memsifter {

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  int max_output_tokens = 4096;
  double temperature = 0.0;
  std::string model;

  /// Convenience for the common single-user-message case.
  static ChatRequest user(std::string content, std::string model = {}, double temperature = 0.0);

  /// Concatenated message contents; what mocks inspect.
  std::string joined_content() const;
};

/// Throws InvalidArgument when messages are empty or the temperature is
/// negative.
void validate(const ChatRequest& request);

struct BackendPolicy {
  int max_retries = 3;
  int backoff_base_ms = 500;
  int backoff_max_ms = 30000;
  int max_concurrency = 4;
  int timeout_ms = 120000;
};

/// Throws InvalidArgument unless every field is positive.
void validate(const BackendPolicy& policy);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws BackendError (or ContextOverflowError) on failure.
  virtual std::string complete(const ChatRequest& request) = 0;
};

using Embedding = std::vector<float>;

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// One vector per input text, all of the same dimension.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

/// Delay before retry number `attempt` (1-based):
/// min(base * 2^(attempt-1) * (1 + jitter), max) with jitter in [0, 0.5).
/// Non-decreasing in `attempt` for any jitter draws.
std::chrono::milliseconds backoff_delay(const BackendPolicy& policy, int attempt, double jitter);

struct RetryRecord {
  int attempt = 0;  // 1-based retry number
  std::chrono::milliseconds delay{0};
  int status = 0;
  std::string error;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Counting gate bounding the number of callers inside a region.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int max_in_flight);

  void acquire();
  void release();
  int max_in_flight() const { return max_; }

  class Slot {
   public:
    explicit Slot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Slot() { limiter_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    ConcurrencyLimiter& limiter_;
  };

 private:
  const int max_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

/// Retries transient failures with exponential backoff and jitter, and caps
/// the number of requests in flight at policy.max_concurrency. Fatal errors,
/// including context overflow, propagate immediately.
class RetryingChatBackend : public ChatBackend {
 public:
  RetryingChatBackend(std::shared_ptr<ChatBackend> inner, BackendPolicy policy, std::uint64_t jitter_seed = 0,
                      Sleeper sleeper = {});

  struct Result {
    std::string text;
    std::vector<RetryRecord> retries;
  };

  Result complete_with_trace(const ChatRequest& request);
  std::string complete(const ChatRequest& request) override { return complete_with_trace(request).text; }

  const BackendPolicy& policy() const { return policy_; }

 private:
  double next_jitter();

  std::shared_ptr<ChatBackend> inner_;
  BackendPolicy policy_;
  Sleeper sleeper_;
  ConcurrencyLimiter limiter_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

/// Same contract as RetryingChatBackend for embedding providers.
class RetryingEmbeddingBackend : public EmbeddingBackend {
 public:
  RetryingEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner, BackendPolicy policy,
                           std::uint64_t jitter_seed = 0, Sleeper sleeper = {});

  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<EmbeddingBackend> inner_;
  BackendPolicy policy_;
  Sleeper sleeper_;
  ConcurrencyLimiter limiter_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

/// Memoises responses keyed by model and a hash of the full request, so only
/// byte-identical requests share an entry.
class CachingChatBackend : public ChatBackend {
 public:
  explicit CachingChatBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

  std::string complete(const ChatRequest& request) override;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, std::string> cache_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

/// Stable key of a request: model plus a hex digest over every field.
std::string request_fingerprint(const ChatRequest& request);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace memsifter
