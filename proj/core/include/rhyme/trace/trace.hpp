// Copyright 2026 The Rhyme Authors
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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rhyme/response.hpp"

namespace rhyme::trace {

/// Multi-epoch rollout trace with lookup by (epoch, prompt).
class Trace {
 public:
  Trace() = default;
  explicit Trace(std::vector<Response> responses);

  [[nodiscard]] const std::vector<Response>& responses() const { return responses_; }
  [[nodiscard]] std::size_t size() const { return responses_.size(); }
  /// Sorted, unique.
  [[nodiscard]] const std::vector<std::int64_t>& epochs() const { return epochs_; }
  /// In order of first appearance.
  [[nodiscard]] const std::vector<std::string>& prompts() const { return prompts_; }
  [[nodiscard]] bool has_epoch(std::int64_t epoch) const;
  /// True when every response carries its tokens.
  [[nodiscard]] bool has_tokens() const { return has_tokens_; }

  /// Indices into responses() of one prompt's group in one epoch, in trace
  /// order. Empty if absent.
  [[nodiscard]] std::span<const std::size_t> group(std::int64_t epoch,
                                                   std::string_view prompt_id) const;
  /// Prompts that have responses in `epoch`, in first-appearance order.
  [[nodiscard]] std::vector<std::string> prompts_in(std::int64_t epoch) const;

 private:
  std::vector<Response> responses_;
  std::vector<std::int64_t> epochs_;
  std::vector<std::string> prompts_;
  std::map<std::int64_t, std::map<std::string, std::vector<std::size_t>, std::less<>>> index_;
  bool has_tokens_ = false;
};

/// One JSON object per line:
/// `{"prompt_id": str, "epoch": int, "tokens": [int], "reward": float}`.
/// Length-only traces carry `"length": int` and an empty token list.
void write_jsonl(const Trace& trace, std::ostream& out);
[[nodiscard]] std::string to_jsonl(const Trace& trace);
/// Throws InputError on malformed lines (with the line number).
[[nodiscard]] Trace read_jsonl(std::istream& in);
[[nodiscard]] Trace load_jsonl(const std::filesystem::path& path);

}  // namespace rhyme::trace
