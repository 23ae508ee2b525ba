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

// Typed pipeline configuration. Values resolve in layers:
// built-in defaults, then an optional config file, then MEMSIFTER_* environment
// variables. The file grammar is documented in docs/config.md.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"
#include "memsifter/backends.h"

namespace memsifter {

struct EndpointConfig {
  std::string model;
  BackendPolicy policy;
};

struct PipelineConfig {
  std::size_t top_k = 10;
  std::size_t proxy_context_budget_tokens = 131072;
  bool prefilter_enabled = true;
  bool include_full_cutoff = true;
  double alpha = 1.0;
  double beta0 = 0.5;
  /// 0 means one epoch: ceil(task count / batch_size) steps.
  std::int64_t anneal_steps = 0;
  double tau = 0.2;
  std::size_t grpo_group_size = 6;
  std::size_t batch_size = 32;
  double eps_std = 1e-8;
  std::size_t merge_top_k = 3;
  /// "f1" or "exact".
  std::string scorer = "f1";
  double proxy_temperature = 1.0;
  double working_temperature = 0.0;
  std::size_t eval_concurrency = 4;
  std::uint64_t seed = 0;
  std::string api_base;
  std::string embed_base;

  EndpointConfig proxy{"", {}};
  EndpointConfig working{"", {}};
  EndpointConfig embedding{"", {}};

  /// Hex digest over every resolved value. The API key is never part of the
  /// config and never hashed.
  std::string fingerprint() const;

  std::int64_t resolved_anneal_steps(std::size_t task_count) const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Throws ConfigError naming the offending field.
void validate(const PipelineConfig& cfg);

/// Parses config text on top of `base`. Throws ConfigError.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});

/// defaults <- file (if given) <- env. Throws ConfigError.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env);

/// All resolved values as JSON (for reports).
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace memsifter
