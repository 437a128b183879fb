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
#include <string_view>

#include "rhyme/spec/engine.hpp"

namespace rhyme {
class Config;
}

namespace rhyme::sim {

enum class Policy { colocated, streaming, histopipe_naive, histopipe_two_tier };

[[nodiscard]] std::string_view to_string(Policy p);
/// Throws ConfigError on unknown names.
[[nodiscard]] Policy parse_policy(std::string_view name);
[[nodiscard]] inline bool is_histopipe(Policy p) {
  return p == Policy::histopipe_naive || p == Policy::histopipe_two_tier;
}

struct ClusterSpec {
  int rollout_workers = 16;
  int reward_workers = 4;
  int n_groups = 8;
  int prompts_per_step = 64;
  int max_batch = 1024;
  double weight_propagation_delay = 1.0;
  int min_wks = 1;
  /// 0 means rollout_workers - (n_groups - 1).
  int max_wks = 0;

  static ClusterSpec from_config(const Config& cfg);
  void validate() const;
  [[nodiscard]] int effective_max_wks() const;
};

/// Durations of everything the simulator charges for.
struct CostParams {
  double iter_fixed = 0.01;
  double iter_per_seq = 0.0003;
  double verify_per_token = 0.00003;
  double prefill_per_token = 0.00002;
  std::int64_t prompt_len = 256;
  double reward_per_sample = 0.002;
  double train_per_sample = 0.004;
  double train_fixed = 0.5;
  double context_switch_frac = 0.05;
  double plan_tail = 2.0;
  /// Optional `len,dp,seconds` table used by the planner instead of the
  /// analytic form.
  std::string profile;

  static CostParams from_config(const Config& cfg);
  void validate() const;

  /// One forward pass over `batch` sequences verifying `drafted` tokens.
  [[nodiscard]] double iteration(std::int64_t batch, std::int64_t drafted = 0) const {
    return iter_fixed + iter_per_seq * static_cast<double>(batch) +
           verify_per_token * static_cast<double>(drafted);
  }
  [[nodiscard]] double prefill(std::int64_t generated) const {
    return prefill_per_token * static_cast<double>(prompt_len + generated);
  }
  [[nodiscard]] double train(std::int64_t samples) const {
    return train_fixed + train_per_sample * static_cast<double>(samples);
  }
};

struct SimOptions {
  Policy policy = Policy::streaming;
  std::uint64_t seed = 1;
  /// 0 runs every step the trace supports.
  std::int64_t steps = 0;
  double oversample_pct = 0.0;
  int minibatch = 64;
  bool migration = true;
  double alpha = 10.0;
  bool speculation = false;
  int max_chunk = 32;
  double plan_precision = 1.0;
  spec::SpecConfig spec{};

  /// Reads `sim.*` and `spec.*`; RHYME_SIM_SEED, when set, replaces the seed.
  static SimOptions from_config(const Config& cfg);
  void validate() const;
};

struct SimConfig {
  ClusterSpec cluster{};
  CostParams cost{};
  SimOptions sim{};

  static SimConfig from_config(const Config& cfg);
  void validate() const;
};

}  // namespace rhyme::sim
