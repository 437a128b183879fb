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

#include "rhyme/spec/aimd.hpp"

#include <algorithm>

namespace rhyme::spec {

AimdWindow next_window(AimdWindow w, bool all_accepted) {
  w.size = all_accepted ? std::min(w.size + w.add_step, w.max) : w.init;
  return w;
}

PrefixPolicy choose_prefix(PrefixPolicy p, bool found_match) {
  p.current_len = found_match ? p.initial_len : std::max(p.current_len - 1, p.min_len);
  return p;
}

std::size_t verify(std::span<const TokenId> draft, std::span<const TokenId> truth) {
  const auto n = std::min(draft.size(), truth.size());
  std::size_t i = 0;
  while (i < n && draft[i] == truth[i]) ++i;
  return i;
}

}  // namespace rhyme::spec
