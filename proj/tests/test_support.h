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

// Shared fixtures for the unit tests.

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "memsifter/memory_store.h"

namespace memsifter::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("memsifter_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = file(name);
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// One session per content string, one user turn each, ids 0..N-1.
inline MemoryBank bank_of(const std::vector<std::string>& contents) {
  std::vector<Session> sessions;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    sessions.push_back(Session::create(static_cast<std::int64_t>(i), {Turn{Role::kUser, contents[i], {}}}));
  }
  return MemoryBank::create(std::move(sessions));
}

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len = 8) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz";
  std::string w;
  const std::size_t len = 1 + rng() % max_len;
  for (std::size_t i = 0; i < len; ++i) w += kAlphabet[rng() % 26];
  return w;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t max_words = 12) {
  std::string out;
  const std::size_t n = 1 + rng() % max_words;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += random_word(rng);
  }
  return out;
}

/// Random bank with distinct, possibly non-contiguous ids.
inline MemoryBank random_bank(std::mt19937_64& rng, std::size_t max_sessions = 8) {
  const std::size_t n = 1 + rng() % max_sessions;
  std::vector<Session> sessions;
  std::int64_t next_id = static_cast<std::int64_t>(rng() % 5);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Turn> turns;
    const std::size_t n_turns = 1 + rng() % 4;
    for (std::size_t t = 0; t < n_turns; ++t) {
      Turn turn{static_cast<Role>(rng() % 3), random_text(rng), {}};
      if (rng() % 2 == 0) turn.timestamp = static_cast<std::int64_t>(rng() % 100000);
      turns.push_back(std::move(turn));
    }
    sessions.push_back(Session::create(next_id, std::move(turns)));
    next_id += 1 + static_cast<std::int64_t>(rng() % 3);
  }
  return MemoryBank::create(std::move(sessions), "random");
}

}  // namespace memsifter::testing
