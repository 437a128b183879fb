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

#include "rhyme/pipe/migration.hpp"

#include <algorithm>
#include <cmath>

#include "rhyme/pipe/grouping.hpp"

namespace rhyme::pipe {

double beta_from_history(std::span<const double> growth_rates, double floor, double percentile) {
  if (growth_rates.empty()) return floor;
  return std::max(nearest_rank(growth_rates, percentile), floor);
}

bool in_tail(std::int64_t remaining, std::int64_t size, double alpha) {
  const auto window = static_cast<std::int64_t>(std::ceil(alpha * static_cast<double>(size) / 100.0 - 1e-9));
  return remaining <= window;
}

MigrationDecision migration_decision(const GroupState& group, double generated_len,
                                     std::span<const GroupLoad> others,
                                     const MigrationPolicy& policy, bool inter_step_allowed) {
  MigrationDecision out;
  if (!in_tail(group.remaining, group.size, policy.alpha)) return out;
  if (!(generated_len > policy.beta * group.max_hist_len)) return out;

  const bool short_group = 2 * group.index < group.n_groups;
  if (short_group) {
    const GroupLoad* best = nullptr;
    for (const auto& g : others) {
      if (!g.active || g.index == group.index) continue;
      if (best == nullptr || g.load < best->load || (g.load == best->load && g.index < best->index)) {
        best = &g;
      }
    }
    if (best != nullptr) {
      out.kind = MigrationKind::intra_step;
      out.target_group = best->index;
      return out;
    }
  }
  if (inter_step_allowed) out.kind = MigrationKind::inter_step;
  return out;
}

}  // namespace rhyme::pipe
