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

#include "memsifter/http_backend.h"

#include <algorithm>
#include <cctype>

#include "httplib.h"
#include "memsifter/errors.h"

namespace memsifter {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

SplitUrl split_url(const std::string& base) {
  const auto scheme_end = base.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("base url needs a scheme: " + base);
  const auto path_start = base.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = base;
  } else {
    out.scheme_host_port = base.substr(0, path_start);
    out.path_prefix = base.substr(path_start);
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string post_json(const HttpEndpoint& ep, const std::string& suffix, const json& body) {
  const SplitUrl url = split_url(ep.base_url);
  httplib::Client client(url.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(ep.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);
  auto res = client.Post(url.path_prefix + suffix, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendError(FailureKind::kTransient, 0, "request to " + ep.base_url + suffix + " failed: " +
                                                       httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) throw_for_status(res->status, res->body);
  return res->body;
}

}  // namespace

json chat_request_body(const ChatRequest& request, const std::string& default_model) {
  json body;
  body["model"] = request.model.empty() ? default_model : request.model;
  body["messages"] = json::array();
  for (const ChatMessage& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  body["max_tokens"] = request.max_output_tokens;
  body["temperature"] = request.temperature;
  body["stream"] = false;
  return body;
}

std::string parse_chat_response(const std::string& body) {
  try {
    const json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(FailureKind::kFatal, 200, std::string("malformed chat response: ") + e.what());
  }
}

json embedding_request_body(std::span<const std::string> texts, const std::string& model) {
  json body;
  body["model"] = model;
  body["input"] = json::array();
  for (const auto& t : texts) body["input"].push_back(t);
  return body;
}

std::vector<Embedding> parse_embedding_response(const std::string& body, std::size_t expected) {
  try {
    const json j = json::parse(body);
    const json& data = j.at("data");
    std::vector<Embedding> out(expected);
    std::vector<bool> filled(expected, false);
    for (std::size_t pos = 0; pos < data.size(); ++pos) {
      const json& item = data.at(pos);
      const std::size_t index = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
      if (index >= expected || filled[index]) throw BackendError(FailureKind::kFatal, 200, "bad embedding index");
      out[index] = item.at("embedding").get<std::vector<float>>();
      filled[index] = true;
    }
    if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
      throw BackendError(FailureKind::kFatal, 200, "embedding response is missing items");
    }
    for (const auto& v : out) {
      if (v.size() != out.front().size()) throw BackendError(FailureKind::kFatal, 200, "ragged embedding dimensions");
    }
    return out;
  } catch (const json::exception& e) {
    throw BackendError(FailureKind::kFatal, 200, std::string("malformed embedding response: ") + e.what());
  }
}

void throw_for_status(int status, const std::string& body) {
  const std::string lower = lowercase(body);
  if ((status == 400 || status == 413) &&
      (lower.find("context_length") != std::string::npos || lower.find("context length") != std::string::npos ||
       lower.find("maximum context") != std::string::npos)) {
    throw ContextOverflowError(status, "context length exceeded: " + body.substr(0, 512));
  }
  const bool transient = status == 408 || status == 409 || status == 429 || status >= 500;
  throw BackendError(transient ? FailureKind::kTransient : FailureKind::kFatal, status,
                     "HTTP " + std::to_string(status) + ": " + body.substr(0, 512));
}

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.base_url);
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
  validate(request);
  return parse_chat_response(post_json(endpoint_, "/chat/completions", chat_request_body(request, endpoint_.model)));
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  split_url(endpoint_.base_url);
}

std::vector<Embedding> HttpEmbeddingBackend::embed(std::span<const std::string> texts) {
  if (texts.empty()) throw InvalidArgument("embed called with no texts");
  const std::string body = post_json(endpoint_, "/embeddings", embedding_request_body(texts, endpoint_.model));
  return parse_embedding_response(body, texts.size());
}

}  // namespace memsifter
