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

#include "memsifter/backends.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "memsifter/errors.h"
#include "text_util.h"

namespace memsifter {

ChatRequest ChatRequest::user(std::string content, std::string model, double temperature) {
  ChatRequest r;
  r.messages.push_back({"user", std::move(content)});
  r.model = std::move(model);
  r.temperature = temperature;
  return r;
}

std::string ChatRequest::joined_content() const {
  std::string out;
  for (const ChatMessage& m : messages) {
    if (!out.empty()) out += '\n';
    out += m.content;
  }
  return out;
}

void validate(const ChatRequest& request) {
  if (request.messages.empty()) throw InvalidArgument("chat request has no messages");
  if (!(request.temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (request.max_output_tokens <= 0) throw InvalidArgument("max_output_tokens must be positive");
}

void validate(const BackendPolicy& policy) {
  if (policy.max_retries <= 0 || policy.backoff_base_ms <= 0 || policy.backoff_max_ms <= 0 ||
      policy.max_concurrency <= 0 || policy.timeout_ms <= 0) {
    throw InvalidArgument("backend policy fields must all be positive");
  }
}

std::chrono::milliseconds backoff_delay(const BackendPolicy& policy, int attempt, double jitter) {
  jitter = std::clamp(jitter, 0.0, 0.4999999);
  const int exponent = std::clamp(attempt - 1, 0, 40);
  const double raw = static_cast<double>(policy.backoff_base_ms) * std::ldexp(1.0, exponent) * (1.0 + jitter);
  const double capped = std::min(raw, static_cast<double>(policy.backoff_max_ms));
  return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

ConcurrencyLimiter::ConcurrencyLimiter(int max_in_flight) : max_(max_in_flight) {
  if (max_in_flight <= 0) throw InvalidArgument("max_concurrency must be positive");
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return in_flight_ < max_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

namespace {

Sleeper default_sleeper(Sleeper s) {
  if (s) return s;
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

// Shared retry loop. `record` receives one entry per retry that is about to
// happen.
template <typename Fn>
auto with_retries(const BackendPolicy& policy, const Sleeper& sleep, const std::function<double()>& jitter,
                  std::vector<RetryRecord>* record, Fn&& call) -> decltype(call()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const ContextOverflowError&) {
      throw;
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= policy.max_retries) throw;
      const auto delay = backoff_delay(policy, attempt + 1, jitter());
      if (record) record->push_back({attempt + 1, delay, e.status(), e.what()});
      sleep(delay);
    }
  }
}

}  // namespace

RetryingChatBackend::RetryingChatBackend(std::shared_ptr<ChatBackend> inner, BackendPolicy policy,
                                         std::uint64_t jitter_seed, Sleeper sleeper)
    : inner_(std::move(inner)),
      policy_(policy),
      sleeper_(default_sleeper(std::move(sleeper))),
      limiter_((validate(policy), policy.max_concurrency)),
      rng_(jitter_seed) {}

double RetryingChatBackend::next_jitter() {
  std::lock_guard lock(rng_mu_);
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 0.5;
}

RetryingChatBackend::Result RetryingChatBackend::complete_with_trace(const ChatRequest& request) {
  validate(request);
  Result result;
  result.text = with_retries(policy_, sleeper_, [this] { return next_jitter(); }, &result.retries, [&] {
    ConcurrencyLimiter::Slot slot(limiter_);
    return inner_->complete(request);
  });
  return result;
}

RetryingEmbeddingBackend::RetryingEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner, BackendPolicy policy,
                                                   std::uint64_t jitter_seed, Sleeper sleeper)
    : inner_(std::move(inner)),
      policy_(policy),
      sleeper_(default_sleeper(std::move(sleeper))),
      limiter_((validate(policy), policy.max_concurrency)),
      rng_(jitter_seed) {}

std::vector<Embedding> RetryingEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed called with no texts");
  auto jitter = [this] {
    std::lock_guard lock(rng_mu_);
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53 * 0.5;
  };
  return with_retries(policy_, sleeper_, jitter, nullptr, [&] {
    ConcurrencyLimiter::Slot slot(limiter_);
    return inner_->embed(texts);
  });
}

std::string request_fingerprint(const ChatRequest& request) {
  std::string canon;
  canon += request.model;
  canon += '\x1f';
  canon += std::to_string(request.max_output_tokens);
  canon += '\x1f';
  char temp[32];
  std::snprintf(temp, sizeof(temp), "%.17g", request.temperature);
  canon += temp;
  for (const ChatMessage& m : request.messages) {
    canon += '\x1e';
    canon += m.role;
    canon += '\x1f';
    canon += std::to_string(m.content.size());
    canon += '\x1f';
    canon += m.content;
  }
  return text::hex64(text::fnv1a(canon)) + text::hex64(text::fnv1a(canon, 0x84222325cbf29ce4ULL));
}

std::string CachingChatBackend::complete(const ChatRequest& request) {
  auto key = std::make_pair(request.model, request_fingerprint(request));
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++hits_;
      return it->second;
    }
    ++misses_;
  }
  std::string text = inner_->complete(request);
  std::lock_guard lock(mu_);
  cache_.emplace(std::move(key), text);
  return text;
}

std::size_t CachingChatBackend::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachingChatBackend::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw InvalidArgument("embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace memsifter
