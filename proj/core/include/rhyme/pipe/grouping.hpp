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
#include <span>
#include <string>
#include <vector>

namespace rhyme::pipe {

/// Length history of one prompt, taken from its previous-epoch group.
struct PromptHistory {
  std::string prompt_id;
  double median_len = 0.0;
  double max_len = 0.0;
};

struct RankingGroup {
  int index = 0;
  std::vector<std::string> prompt_ids;
  /// Mean of the members' historical medians.
  double representative_len = 0.0;
  /// Longest historical response of any member.
  double max_hist_len = 0.0;
  int assigned_workers = 0;
};

/// Sizes of `n` near-equal parts of `count` items; the remainder goes to the
/// last (longest) parts.
[[nodiscard]] std::vector<std::size_t> split_sizes(std::size_t count, int n);

/// Sorts prompts by (median, prompt id) and splits them into `n` groups.
/// Throws InputError if n < 2 or there are fewer prompts than groups.
[[nodiscard]] std::vector<RankingGroup> build_groups(std::vector<PromptHistory> histories, int n);

/// Group index served by each worker slot: ascending on odd steps,
/// descending on even steps. Throws InputError if step < 1 or n < 1.
[[nodiscard]] std::vector<int> assignment_order(std::int64_t step, int n);

/// Nearest-rank percentile (pct in (0, 100]) of a non-empty sample.
[[nodiscard]] double nearest_rank(std::span<const double> values, double pct);

/// Median as the mean of the two middle elements.
[[nodiscard]] double median(std::vector<double> values);

}  // namespace rhyme::pipe
