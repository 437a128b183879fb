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
#include <span>

#include "rhyme/response.hpp"

namespace rhyme::spec {

/// Per-response speculation window, grown additively on full acceptance and
/// reset to `init` on any rejection.
struct AimdWindow {
  int size = 2;
  int init = 2;
  int add_step = 2;
  int max = 32;

  [[nodiscard]] bool valid() const { return init >= 1 && init <= size && size <= max; }
};

[[nodiscard]] AimdWindow next_window(AimdWindow w, bool all_accepted);

/// Prefix length used for history lookups. Shrinks by one per failed lookup
/// down to `min_len` and snaps back to `initial_len` after a match.
struct PrefixPolicy {
  int initial_len = 7;
  int min_len = 3;
  int current_len = 7;

  [[nodiscard]] bool valid() const {
    return min_len >= 1 && min_len <= current_len && current_len <= initial_len;
  }
};

[[nodiscard]] PrefixPolicy choose_prefix(PrefixPolicy p, bool found_match);

/// Tokens of `draft` accepted against the true continuation: the length of
/// their common prefix. The verification pass itself always yields one more
/// token on top of this.
[[nodiscard]] std::size_t verify(std::span<const TokenId> draft, std::span<const TokenId> truth);

}  // namespace rhyme::spec
