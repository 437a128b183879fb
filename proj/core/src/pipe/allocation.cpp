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

#include "rhyme/pipe/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "rhyme/util/error.hpp"

namespace rhyme::pipe {

WorkerBounds default_bounds(int wks, int n) { return {1, std::max(1, wks - (n - 1))}; }

CalWksResult cal_wks(double d, std::span<const double> lens, [[maybe_unused]] int wks, double t0,
                     const CostModel& model, WorkerBounds bounds) {
  CalWksResult out;
  std::int64_t needed = 0;
  std::vector<int> plan(lens.size());
  for (std::size_t i = 0; i < lens.size(); ++i) {
    const double target = t0 + static_cast<double>(i) * d;
    int group_wks = -1;
    for (int k = bounds.min_wks; k <= bounds.max_wks; ++k) {
      if (model.tau(lens[i], k) <= target) {
        group_wks = k;
        break;
      }
    }
    if (group_wks == -1) return out;
    needed += group_wks;
    plan[i] = group_wks;
  }
  out.workers_needed = needed;
  out.plan = std::move(plan);
  return out;
}

AllocationPlan plan_allocation(std::span<const double> lens, int wks, double t_train,
                               const CostModel& model, WorkerBounds bounds, double precision) {
  const auto n = static_cast<int>(lens.size());
  if (n < 2) throw InputError("plan_allocation: need at least 2 groups");
  if (!std::is_sorted(lens.begin(), lens.end())) {
    throw InputError("plan_allocation: lengths must be ascending");
  }
  if (bounds.min_wks < 1 || bounds.max_wks < bounds.min_wks) {
    throw InputError("plan_allocation: need 1 <= min_wks <= max_wks");
  }
  if (wks < n * bounds.min_wks) throw InputError("plan_allocation: wks < n * min_wks");
  if (!(precision > 0.0)) throw InputError("plan_allocation: precision must be positive");

  AllocationPlan out;
  out.t0 = std::max(model.tau(lens[0], bounds.max_wks), t_train);
  double d_min = 0.0;
  const double longest = model.tau(lens[n - 1], bounds.min_wks);
  double d_max = std::max(0.0, (longest - out.t0) / (n - 1));
  // Round up so the longest group really fits on min_wks at the limit.
  while (out.t0 + (n - 1) * d_max < longest) {
    d_max = std::nextafter(d_max, std::numeric_limits<double>::infinity());
  }
  const double d_limit = d_max;
  const auto fits = [&](const CalWksResult& r) {
    return r.workers_needed.has_value() && *r.workers_needed <= wks;
  };

  std::optional<CalWksResult> best;
  double best_d = 0.0;
  while (d_max - d_min > precision) {
    const double mid = 0.5 * (d_min + d_max);
    auto r = cal_wks(mid, lens, wks, out.t0, model, bounds);
    if (!fits(r)) {
      d_min = mid;
    } else {
      best = std::move(r);
      best_d = mid;
      d_max = mid;
    }
  }
  if (!best) {
    auto r = cal_wks(d_limit, lens, wks, out.t0, model, bounds);
    if (fits(r)) {
      best = std::move(r);
      best_d = d_limit;
    }
  }
  if (!best) return out;
  out.feasible = true;
  out.d = best_d;
  out.per_group_workers = best->plan;
  for (int i = 0; i < n; ++i) {
    out.predicted_times.push_back(model.tau(lens[i], out.per_group_workers[i]));
  }
  return out;
}

std::string to_json(const AllocationPlan& plan) {
  nlohmann::ordered_json j;
  j["t0"] = plan.t0;
  j["d"] = plan.d;
  j["per_group_workers"] = plan.per_group_workers;
  j["feasible"] = plan.feasible;
  return j.dump();
}

}  // namespace rhyme::pipe
