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

// Backends speaking the chat-completions / embeddings JSON wire shape.

#pragma once

#include <memory>
#include <string>

#include "json.hpp"
#include "memsifter/backends.h"

namespace memsifter {

struct HttpEndpoint {
  /// e.g. "https://api.example.com/v1". The `/chat/completions` or
  /// `/embeddings` suffix is appended.
  std::string base_url;
  std::string api_key;
  std::string model;
  int timeout_ms = 120000;
};

/// Request body for POST {base}/chat/completions.
nlohmann::json chat_request_body(const ChatRequest& request, const std::string& default_model);
/// Text of choices[0].message.content. Throws BackendError (fatal) on a
/// malformed body.
std::string parse_chat_response(const std::string& body);

nlohmann::json embedding_request_body(std::span<const std::string> texts, const std::string& model);
/// data[*].embedding ordered by each item's "index".
std::vector<Embedding> parse_embedding_response(const std::string& body, std::size_t expected);

/// Maps an HTTP status and body to the error taxonomy: 408/409/429/5xx are
/// transient; context-length rejections raise ContextOverflowError.
[[noreturn]] void throw_for_status(int status, const std::string& body);

class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);
  std::string complete(const ChatRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEndpoint endpoint);
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
};

}  // namespace memsifter
