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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhyme/pipe/cost_model.hpp"

namespace rhyme::pipe {

struct WorkerBounds {
  int min_wks = 1;
  int max_wks = 1;
};

/// MIN_WKS = 1, MAX_WKS = wks - (n - 1) so every group can get a worker.
[[nodiscard]] WorkerBounds default_bounds(int wks, int n);

struct CalWksResult {
  /// Empty when some group cannot meet its target even with max_wks.
  std::optional<std::int64_t> workers_needed;
  std::vector<int> plan;
};

/// Smallest worker count per group meeting the target t0 + i * d.
[[nodiscard]] CalWksResult cal_wks(double d, std::span<const double> lens, int wks, double t0,
                                   const CostModel& model, WorkerBounds bounds);

struct AllocationPlan {
  std::vector<int> per_group_workers;
  double d = 0.0;
  double t0 = 0.0;
  bool feasible = false;
  /// tau(lens[i], per_group_workers[i]).
  std::vector<double> predicted_times;
};

/// Bisection on the finish-time gradient d. `lens` must be ascending.
/// Throws InputError for fewer than two groups, unsorted lengths, bad
/// bounds or wks < n * min_wks.
[[nodiscard]] AllocationPlan plan_allocation(std::span<const double> lens, int wks, double t_train,
                                             const CostModel& model, WorkerBounds bounds,
                                             double precision = 1.0);

/// `{"t0":..,"d":..,"per_group_workers":[..],"feasible":..}`
[[nodiscard]] std::string to_json(const AllocationPlan& plan);

}  // namespace rhyme::pipe
