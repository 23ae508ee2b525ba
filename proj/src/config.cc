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

#include "memsifter/config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <variant>
#include <vector>

#include "memsifter/errors.h"
#include "text_util.h"

namespace memsifter {

namespace {

using Value = std::variant<std::int64_t, double, bool, std::string>;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::int64_t as_int(const std::string& key, const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw ConfigError(key, "expected an integer");
}

std::size_t as_size(const std::string& key, const Value& v) {
  const std::int64_t i = as_int(key, v);
  if (i < 0) throw ConfigError(key, "must be non-negative");
  return static_cast<std::size_t>(i);
}

double as_double(const std::string& key, const Value& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError(key, "expected a number");
}

bool as_bool(const std::string& key, const Value& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError(key, "expected true or false");
}

std::string as_string(const std::string& key, const Value& v) {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError(key, "expected a string");
}

struct Field {
  std::string key;
  std::function<void(PipelineConfig&, const Value&)> set;
  std::function<std::string(const PipelineConfig&)> show;
  std::function<nlohmann::json(const PipelineConfig&)> to_json;
  bool is_string = false;
};

template <typename T>
Field make_field(std::string key, T PipelineConfig::*member) {
  Field f;
  f.key = key;
  f.set = [member, key](PipelineConfig& c, const Value& v) {
    if constexpr (std::is_same_v<T, bool>) {
      c.*member = as_bool(key, v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*member = as_double(key, v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      c.*member = as_string(key, v);
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      c.*member = as_int(key, v);
    } else {
      c.*member = static_cast<T>(as_size(key, v));
    }
  };
  f.show = [member](const PipelineConfig& c) {
    if constexpr (std::is_same_v<T, bool>) {
      return std::string(c.*member ? "true" : "false");
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*member);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return "\"" + c.*member + "\"";
    } else {
      return std::to_string(c.*member);
    }
  };
  f.to_json = [member](const PipelineConfig& c) { return nlohmann::json(c.*member); };
  f.is_string = std::is_same_v<T, std::string>;
  return f;
}

void add_endpoint_fields(std::vector<Field>& fields, const std::string& prefix, EndpointConfig PipelineConfig::*ep) {
  fields.push_back({prefix + ".model",
                    [ep, prefix](PipelineConfig& c, const Value& v) { (c.*ep).model = as_string(prefix + ".model", v); },
                    [ep](const PipelineConfig& c) { return "\"" + (c.*ep).model + "\""; },
                    [ep](const PipelineConfig& c) { return nlohmann::json((c.*ep).model); },
                    true});
  auto policy_field = [&](const std::string& name, int BackendPolicy::*member) {
    const std::string key = prefix + "." + name;
    fields.push_back({key,
                      [ep, member, key](PipelineConfig& c, const Value& v) {
                        const std::int64_t i = as_int(key, v);
                        if (i > 1'000'000'000 || i < -1'000'000'000) throw ConfigError(key, "out of range");
                        (c.*ep).policy.*member = static_cast<int>(i);
                      },
                      [ep, member](const PipelineConfig& c) { return std::to_string((c.*ep).policy.*member); },
                      [ep, member](const PipelineConfig& c) { return nlohmann::json((c.*ep).policy.*member); }});
  };
  policy_field("max_retries", &BackendPolicy::max_retries);
  policy_field("backoff_base_ms", &BackendPolicy::backoff_base_ms);
  policy_field("backoff_max_ms", &BackendPolicy::backoff_max_ms);
  policy_field("max_concurrency", &BackendPolicy::max_concurrency);
  policy_field("timeout_ms", &BackendPolicy::timeout_ms);
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    f.push_back(make_field("top_k", &PipelineConfig::top_k));
    f.push_back(make_field("proxy_context_budget_tokens", &PipelineConfig::proxy_context_budget_tokens));
    f.push_back(make_field("prefilter_enabled", &PipelineConfig::prefilter_enabled));
    f.push_back(make_field("include_full_cutoff", &PipelineConfig::include_full_cutoff));
    f.push_back(make_field("alpha", &PipelineConfig::alpha));
    f.push_back(make_field("beta0", &PipelineConfig::beta0));
    f.push_back(make_field("anneal_steps", &PipelineConfig::anneal_steps));
    f.push_back(make_field("tau", &PipelineConfig::tau));
    f.push_back(make_field("grpo_group_size", &PipelineConfig::grpo_group_size));
    f.push_back(make_field("batch_size", &PipelineConfig::batch_size));
    f.push_back(make_field("eps_std", &PipelineConfig::eps_std));
    f.push_back(make_field("merge_top_k", &PipelineConfig::merge_top_k));
    f.push_back(make_field("scorer", &PipelineConfig::scorer));
    f.push_back(make_field("proxy_temperature", &PipelineConfig::proxy_temperature));
    f.push_back(make_field("working_temperature", &PipelineConfig::working_temperature));
    f.push_back(make_field("eval_concurrency", &PipelineConfig::eval_concurrency));
    f.push_back(make_field("seed", &PipelineConfig::seed));
    f.push_back(make_field("api_base", &PipelineConfig::api_base));
    f.push_back(make_field("embed_base", &PipelineConfig::embed_base));
    add_endpoint_fields(f, "proxy", &PipelineConfig::proxy);
    add_endpoint_fields(f, "working", &PipelineConfig::working);
    add_endpoint_fields(f, "embedding", &PipelineConfig::embedding);
    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return kFields;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

bool is_bare_key(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

// Number, bool or quoted string. With `allow_bare` an unquoted word is taken
// as a string (used for environment values).
Value parse_value(const std::string& key, std::string_view raw, bool allow_bare) {
  raw = text::trim(raw);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      char c = raw[i];
      if (c == '\\' && i + 2 < raw.size()) {
        const char n = raw[++i];
        c = n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else if (c == '"') {
        throw ConfigError(key, "unescaped quote in string");
      }
      out.push_back(c);
    }
    return out;
  }
  std::string digits(raw);
  digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
  std::int64_t i = 0;
  auto [iend, iec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
  if (iec == std::errc() && iend == digits.data() + digits.size() && !digits.empty()) return i;
  if (!digits.empty()) {
    char* end = nullptr;
    const double d = std::strtod(digits.c_str(), &end);
    if (end == digits.c_str() + digits.size()) return d;
  }
  if (allow_bare && !raw.empty()) return std::string(raw);
  throw ConfigError(key, "cannot parse value '" + std::string(raw) + "'");
}

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string env_name(const std::string& key) {
  std::string out = "MEMSIFTER_";
  for (char c : key) out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

void validate_policy(const std::string& prefix, const BackendPolicy& p) {
  require(p.max_retries > 0, prefix + ".max_retries", "must be positive");
  require(p.backoff_base_ms > 0, prefix + ".backoff_base_ms", "must be positive");
  require(p.backoff_max_ms > 0, prefix + ".backoff_max_ms", "must be positive");
  require(p.max_concurrency > 0, prefix + ".max_concurrency", "must be positive");
  require(p.timeout_ms > 0, prefix + ".timeout_ms", "must be positive");
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

void validate(const PipelineConfig& c) {
  require(c.top_k >= 1, "top_k", "must be >= 1");
  require(c.proxy_context_budget_tokens >= 1, "proxy_context_budget_tokens", "must be >= 1");
  require(c.alpha >= 0.0, "alpha", "must be >= 0");
  require(c.beta0 >= 0.0, "beta0", "must be >= 0");
  require(c.anneal_steps >= 0, "anneal_steps", "must be >= 0");
  require(c.tau >= 0.0 && c.tau <= 1.0, "tau", "must lie in [0, 1]");
  require(c.grpo_group_size >= 2, "grpo_group_size", "must be >= 2");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.eps_std >= 0.0, "eps_std", "must be >= 0");
  require(c.merge_top_k >= 1, "merge_top_k", "must be >= 1");
  require(c.scorer == "f1" || c.scorer == "exact", "scorer", "must be \"f1\" or \"exact\"");
  require(c.proxy_temperature >= 0.0, "proxy_temperature", "must be >= 0");
  require(c.working_temperature >= 0.0, "working_temperature", "must be >= 0");
  require(c.eval_concurrency >= 1, "eval_concurrency", "must be >= 1");
  validate_policy("proxy", c.proxy.policy);
  validate_policy("working", c.working.policy);
  validate_policy("embedding", c.embedding.policy);
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::string table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::vector<std::string> seen;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = strip_comment(text.substr(start, end - start));
    const std::string_view body = text::trim(line);
    start = end + 1;
    if (body.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where, "unterminated table header");
      table = std::string(text::trim(body.substr(1, body.size() - 2)));
      if (!is_bare_key(table)) throw ConfigError(where, "invalid table name '" + table + "'");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where, "expected key = value");
    const std::string_view k = text::trim(body.substr(0, eq));
    if (!is_bare_key(k)) throw ConfigError(where, "invalid key '" + std::string(k) + "'");
    const std::string key = table.empty() ? std::string(k) : table + "." + std::string(k);
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(key, "unknown key");
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) throw ConfigError(key, "set twice");
    seen.push_back(key);
    f->set(base, parse_value(key, body.substr(eq + 1), false));
  }
  validate(base);
  return base;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
  PipelineConfig cfg;
  if (path) {
    std::string text;
    try {
      text = text::read_file(*path);
    } catch (const IoError& e) {
      throw ConfigError("config", e.what());
    }
    cfg = parse_config(text, cfg);
  }
  if (env) {
    for (const Field& f : fields()) {
      auto raw = env(env_name(f.key));
      if (!raw) continue;
      f.set(cfg, f.is_string ? Value(*raw) : parse_value(f.key, *raw, true));
    }
  }
  validate(cfg);
  return cfg;
}

std::string PipelineConfig::fingerprint() const {
  std::string canon;
  for (const Field& f : fields()) canon += f.key + "=" + f.show(*this) + "\n";
  return text::hex64(text::fnv1a(canon));
}

std::int64_t PipelineConfig::resolved_anneal_steps(std::size_t task_count) const {
  if (anneal_steps > 0) return anneal_steps;
  const std::size_t steps = (task_count + batch_size - 1) / std::max<std::size_t>(batch_size, 1);
  return static_cast<std::int64_t>(std::max<std::size_t>(steps, 1));
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const Field& f : fields()) j[f.key] = f.to_json(cfg);
  return j;
}

}  // namespace memsifter
