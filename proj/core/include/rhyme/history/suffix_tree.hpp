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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhyme/response.hpp"

namespace rhyme::history {

/// Draft proposed for a prefix. Empty `tokens` and `matched_prefix_len == 0`
/// mean the prefix does not occur in the indexed responses.
struct DraftResult {
  std::vector<TokenId> tokens;
  std::size_t matched_prefix_len = 0;
  double source_priority = 0.0;
};

/// Generalized suffix tree over the responses one prompt produced in one
/// epoch, with reward-derived node priorities.
///
/// Every suffix of every response ends in a leaf. Suffixes that are also a
/// proper prefix of some other suffix end at an interior node; logically
/// that node owns an extra terminator leaf, represented here by
/// `suffix_end`/`end_weight` on the node. A leaf (or terminator) carries the
/// summed reward of all responses that have that suffix, and every node's
/// priority is its terminator weight plus the sum of its children's
/// priorities. Equivalently, the priority of the node spelling `x` is
/// `sum over responses r of reward(r) * occurrences(x in r)`.
///
/// Built once (Ukkonen, linear in the total token count) and immutable
/// afterwards, so a tree can be shared across threads freely.
class SuffixTree {
 public:
  /// A point in the tree: `offset` tokens into the edge that leads to
  /// `node`. `offset == edge length` means the position is at `node` itself.
  struct Position {
    std::int32_t node = 0;
    std::int32_t offset = 0;

    friend bool operator==(const Position&, const Position&) = default;
  };

  struct Stats {
    std::size_t nodes = 0;
    std::size_t tokens = 0;
    std::size_t responses = 0;
    std::size_t approx_bytes = 0;
  };

  SuffixTree() = default;

  /// Indexes `responses`. Responses with no tokens are skipped; a NaN or
  /// infinite reward, or a response for another prompt, throws InputError.
  static SuffixTree build(std::string prompt_id, std::int64_t epoch,
                          std::span<const Response> responses);

  /// Position spelling exactly `prefix`, if it occurs inside some indexed
  /// response. An empty prefix yields nothing.
  [[nodiscard]] std::optional<Position> match(std::span<const TokenId> prefix) const;

  /// Greedy draft: from the position of `prefix`, repeatedly follow the
  /// branch of highest priority (ties go to the smaller token id; a
  /// terminator wins only when strictly ahead) until `window` tokens are
  /// collected or a suffix ends.
  [[nodiscard]] DraftResult draft(std::span<const TokenId> prefix, std::size_t window) const;
  [[nodiscard]] std::vector<TokenId> continuation(Position from, std::size_t window) const;

  /// Priority of the node the position lies on (or just above).
  [[nodiscard]] double priority(Position at) const;
  /// True when some indexed suffix ends exactly at `at`.
  [[nodiscard]] bool ends_suffix(Position at) const;

  [[nodiscard]] const std::string& prompt_id() const { return prompt_id_; }
  [[nodiscard]] std::int64_t epoch() const { return epoch_; }
  [[nodiscard]] double root_priority() const { return nodes_.empty() ? 0.0 : nodes_[0].priority; }
  [[nodiscard]] std::size_t total_tokens() const { return total_tokens_; }
  /// Logical node count, terminator leaves included. At most 2n+1.
  [[nodiscard]] std::size_t node_count() const;
  [[nodiscard]] Stats stats() const;

  /// Checks the structural invariants (distinct first tokens per node,
  /// priority sums, size bound). Used by tests; linear time.
  [[nodiscard]] bool check_invariants() const;

 private:
  struct Node {
    std::int32_t edge_begin = 0;
    std::int32_t edge_len = 0;
    std::int32_t child_begin = 0;
    std::int32_t child_count = 0;
    /// Index into children_ of the greedy branch, -1 to stop here.
    std::int32_t best = -1;
    bool suffix_end = false;
    double end_weight = 0.0;
    double priority = 0.0;
  };
  struct Child {
    TokenId token;
    std::int32_t node;
  };

  [[nodiscard]] std::int32_t find_child(const Node& n, TokenId token) const;

  std::string prompt_id_;
  std::int64_t epoch_ = 0;
  std::size_t total_tokens_ = 0;
  std::size_t responses_ = 0;
  std::vector<TokenId> text_;
  std::vector<Node> nodes_;
  std::vector<Child> children_;
};

}  // namespace rhyme::history
