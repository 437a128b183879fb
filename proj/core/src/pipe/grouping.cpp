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

#include "rhyme/pipe/grouping.hpp"

#include <algorithm>
#include <cmath>

#include "rhyme/util/error.hpp"

namespace rhyme::pipe {

std::vector<std::size_t> split_sizes(std::size_t count, int n) {
  const auto parts = static_cast<std::size_t>(n);
  std::vector<std::size_t> sizes(parts, count / parts);
  const auto extra = count % parts;
  for (std::size_t i = parts - extra; i < parts; ++i) ++sizes[i];
  return sizes;
}

std::vector<RankingGroup> build_groups(std::vector<PromptHistory> histories, int n) {
  if (n < 2) throw InputError("build_groups: need at least 2 groups");
  if (histories.size() < static_cast<std::size_t>(n)) {
    throw InputError("build_groups: fewer prompts than groups");
  }
  std::sort(histories.begin(), histories.end(), [](const auto& a, const auto& b) {
    if (a.median_len != b.median_len) return a.median_len < b.median_len;
    return a.prompt_id < b.prompt_id;
  });
  const auto sizes = split_sizes(histories.size(), n);
  std::vector<RankingGroup> groups(static_cast<std::size_t>(n));
  std::size_t pos = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& grp = groups[g];
    grp.index = static_cast<int>(g);
    double sum = 0.0;
    for (std::size_t k = 0; k < sizes[g]; ++k, ++pos) {
      grp.prompt_ids.push_back(histories[pos].prompt_id);
      sum += histories[pos].median_len;
      grp.max_hist_len = std::max(grp.max_hist_len, histories[pos].max_len);
    }
    grp.representative_len = sum / static_cast<double>(sizes[g]);
  }
  return groups;
}

std::vector<int> assignment_order(std::int64_t step, int n) {
  if (step < 1 || n < 1) throw InputError("assignment_order: need step >= 1 and n >= 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = step % 2 == 1 ? i : n - 1 - i;
  return order;
}

double nearest_rank(std::span<const double> values, double pct) {
  if (values.empty()) throw InputError("nearest_rank: empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace rhyme::pipe
