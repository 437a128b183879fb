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
#include <iosfwd>
#include <string>
#include <vector>

#include "rhyme/sim/cluster.hpp"
#include "rhyme/spec/engine.hpp"
#include "rhyme/trace/trace.hpp"

namespace rhyme::sim {

enum class EventKind { rollout_finish, migration, weight_update, reward_done, train_done, step_boundary };

[[nodiscard]] std::string_view to_string(EventKind k);

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::step_boundary;
  std::int64_t step = 0;
  /// `prompt/epoch/slot`; empty for events not tied to a sample.
  std::string sample;
  /// `rollout-3`, `reward-0`, `train-0` or empty.
  std::string worker;
  std::int64_t weight_version = -1;
  bool migrated = false;
  /// Free-form: migration kind and target, sample count of a train step.
  std::string detail;
};

struct TimelineRow {
  std::string worker;
  double start = 0.0;
  double end = 0.0;
  std::string activity;
};

struct StepMetrics {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  bool histopipe = false;
  double rollout_start = 0.0;
  double rollout_end = 0.0;
  double train_done = 0.0;
  std::int64_t samples = 0;  // trained in this step
  std::int64_t migrated_intra = 0;
  std::int64_t migrated_inter = 0;
  /// (last - first worker finish) / rollout span of this step.
  double earliest_idle_fraction = 0.0;
  std::vector<int> group_workers;
  spec::SpecCounters spec{};
};

struct MetricsReport {
  std::string policy;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  std::int64_t samples = 0;
  double makespan = 0.0;
  double samples_per_second = 0.0;
  std::vector<double> worker_bubble;
  double bubble_fraction = 0.0;
  double rollout_share = 0.0;
  double reward_share = 0.0;
  double train_share = 0.0;
  double migration_pct = 0.0;
  double speculation_rate = 0.0;
  double acceptance_rate = 0.0;
  double earliest_idle_fraction = 0.0;
  /// Mean wall time of ten steps.
  double wall_per_10_steps = 0.0;
  /// Every sample finished exactly once, in its step or the next.
  bool conservation_ok = true;
  std::vector<StepMetrics> per_step;
};

struct SimResult {
  MetricsReport metrics;
  std::vector<SimEvent> events;
  std::vector<TimelineRow> timeline;
};

/// Discrete-event run of the rollout -> reward -> train pipeline.
/// Deterministic for fixed inputs. Throws InputError if the trace cannot
/// drive the policy (histopipe needs two epochs, speculation needs tokens)
/// and InfeasibleError if the allocation planner finds no plan.
[[nodiscard]] SimResult run(const trace::Trace& trace, const SimConfig& config);

/// One JSON object per line.
void write_events_jsonl(const std::vector<SimEvent>& events, std::ostream& out);
[[nodiscard]] std::string events_jsonl(const std::vector<SimEvent>& events);

}  // namespace rhyme::sim
