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

#include <cstdint>
#include <string>
#include <vector>

namespace rhyme {

using TokenId = std::int32_t;

/// One rollout sample.
///
/// `length` is the generated token count. For token traces it always equals
/// `tokens.size()`; length-only traces (used for scheduling studies) leave
/// `tokens` empty.
struct Response {
  std::string prompt_id;
  std::int64_t epoch = 0;
  std::vector<TokenId> tokens;
  double reward = 0.0;
  std::int64_t length = 0;

  [[nodiscard]] bool has_tokens() const { return !tokens.empty(); }
};

}  // namespace rhyme
