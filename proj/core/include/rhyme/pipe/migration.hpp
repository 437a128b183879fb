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

namespace rhyme::pipe {

struct MigrationPolicy {
  /// Tail window, percent of the group's rollouts.
  double alpha = 10.0;
  double beta = 1.1;
  double beta_floor = 1.1;
  double percentile = 75.0;

  [[nodiscard]] bool valid() const {
    return alpha > 0.0 && alpha < 100.0 && beta >= beta_floor;
  }
};

/// max(nearest-rank percentile of the growth rates, floor); `floor` for an
/// empty list.
[[nodiscard]] double beta_from_history(std::span<const double> growth_rates, double floor = 1.1,
                                       double percentile = 75.0);

/// Live view of one group during a step.
struct GroupState {
  int index = 0;
  int n_groups = 1;
  std::int64_t size = 0;       // rollouts assigned this step
  std::int64_t remaining = 0;  // rollouts not finished yet
  double max_hist_len = 0.0;
};

/// A group that could host an intra-step migration.
struct GroupLoad {
  int index = 0;
  double load = 0.0;
  bool active = false;
};

enum class MigrationKind { none, intra_step, inter_step };

struct MigrationDecision {
  MigrationKind kind = MigrationKind::none;
  int target_group = -1;
};

/// True while at most ceil(alpha% of size) rollouts remain.
[[nodiscard]] bool in_tail(std::int64_t remaining, std::int64_t size, double alpha);

/// Migrates only when the group is in its tail AND the rollout is longer
/// than beta times the group's longest historical response. Groups in the
/// lower half prefer the least-loaded other active group; the upper half,
/// or a lower group with no candidate, defers to the next step when
/// `inter_step_allowed`.
[[nodiscard]] MigrationDecision migration_decision(const GroupState& group, double generated_len,
                                                   std::span<const GroupLoad> others,
                                                   const MigrationPolicy& policy,
                                                   bool inter_step_allowed = true);

}  // namespace rhyme::pipe
