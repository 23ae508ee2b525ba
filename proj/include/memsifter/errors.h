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

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace memsifter {

/// Root of every domain error raised by the engine. The CLI maps anything
/// derived from this to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyHistory : public Error {
 public:
  EmptyHistory() : Error("history contains no turns") {}
};

/// Malformed input file. `line` is 1-based; 0 when the error is not tied to
/// a line (e.g. a whole-document JSON file).
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class MissingRankingError : public Error {
 public:
  MissingRankingError() : Error("output contains no <ranking>...</ranking> block") {}
};

enum class Repair { kDeduped, kTruncated, kPaddedNone, kWhitespaceNormalized, kDroppedInvalid };

const char* repair_name(Repair r);

class FormatError : public Error {
 public:
  explicit FormatError(std::vector<Repair> repairs);

  const std::vector<Repair>& repairs() const { return repairs_; }

 private:
  std::vector<Repair> repairs_;
};

enum class FailureKind { kTransient, kFatal };

/// Failure talking to a chat or embedding provider. `status` is the HTTP
/// status when one was received, 0 otherwise.
class BackendError : public Error {
 public:
  BackendError(FailureKind kind, int status, const std::string& what)
      : Error(what), kind_(kind), status_(status) {}

  FailureKind kind() const { return kind_; }
  bool transient() const { return kind_ == FailureKind::kTransient; }
  int status() const { return status_; }

  /// Set when the failure happened while evaluating one ablation tier.
  std::optional<std::size_t> cutoff_index() const { return cutoff_index_; }
  void set_cutoff_index(std::size_t index) { cutoff_index_ = index; }

 private:
  FailureKind kind_;
  int status_;
  std::optional<std::size_t> cutoff_index_;
};

class ContextOverflowError : public BackendError {
 public:
  ContextOverflowError(int status, const std::string& what)
      : BackendError(FailureKind::kFatal, status, what) {}
};

class ShapeError : public Error {
 public:
  ShapeError(std::string entry, const std::string& what)
      : Error("entry '" + entry + "': " + what), entry_(std::move(entry)) {}

  const std::string& entry() const { return entry_; }

 private:
  std::string entry_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace memsifter
