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

#include "rhyme/sim/cluster.hpp"

#include <cstdlib>
#include <string>

#include "rhyme/util/config.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::sim {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::colocated:
      return "colocated";
    case Policy::streaming:
      return "streaming";
    case Policy::histopipe_naive:
      return "histopipe_naive";
    case Policy::histopipe_two_tier:
      return "histopipe_two_tier";
  }
  return "unknown";
}

Policy parse_policy(std::string_view name) {
  for (const auto p : {Policy::colocated, Policy::streaming, Policy::histopipe_naive,
                       Policy::histopipe_two_tier}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown policy '" + std::string(name) +
                    "' (colocated | streaming | histopipe_naive | histopipe_two_tier)");
}

ClusterSpec ClusterSpec::from_config(const Config& cfg) {
  ClusterSpec c;
  c.rollout_workers = static_cast<int>(cfg.get_int("cluster.rollout_workers"));
  c.reward_workers = static_cast<int>(cfg.get_int("cluster.reward_workers"));
  c.n_groups = static_cast<int>(cfg.get_int("cluster.n_groups"));
  c.prompts_per_step = static_cast<int>(cfg.get_int("cluster.prompts_per_step"));
  c.max_batch = static_cast<int>(cfg.get_int("cluster.max_batch"));
  c.weight_propagation_delay = cfg.get_double("cluster.weight_propagation_delay");
  c.min_wks = static_cast<int>(cfg.get_int("cluster.min_wks"));
  c.max_wks = static_cast<int>(cfg.get_int("cluster.max_wks"));
  c.validate();
  return c;
}

int ClusterSpec::effective_max_wks() const {
  return max_wks > 0 ? max_wks : rollout_workers - (n_groups - 1);
}

void ClusterSpec::validate() const {
  if (rollout_workers < 1 || reward_workers < 1) {
    throw ConfigError("cluster: need at least one rollout and one reward worker");
  }
  if (n_groups < 2) throw ConfigError("cluster.n_groups must be >= 2");
  if (prompts_per_step < n_groups) throw ConfigError("cluster.prompts_per_step must be >= n_groups");
  if (max_batch < 1) throw ConfigError("cluster.max_batch must be >= 1");
  if (!(weight_propagation_delay >= 0.0)) {
    throw ConfigError("cluster.weight_propagation_delay must be >= 0");
  }
  if (min_wks < 1 || effective_max_wks() < min_wks) {
    throw ConfigError("cluster.min_wks/max_wks: need 1 <= min_wks <= max_wks");
  }
  if (rollout_workers < n_groups * min_wks) {
    throw ConfigError("cluster: rollout_workers must be >= n_groups * min_wks");
  }
}

CostParams CostParams::from_config(const Config& cfg) {
  CostParams c;
  c.iter_fixed = cfg.get_double("cost.iter_fixed");
  c.iter_per_seq = cfg.get_double("cost.iter_per_seq");
  c.verify_per_token = cfg.get_double("cost.verify_per_token");
  c.prefill_per_token = cfg.get_double("cost.prefill_per_token");
  c.prompt_len = cfg.get_int("cost.prompt_len");
  c.reward_per_sample = cfg.get_double("cost.reward_per_sample");
  c.train_per_sample = cfg.get_double("cost.train_per_sample");
  c.train_fixed = cfg.get_double("cost.train_fixed");
  c.context_switch_frac = cfg.get_double("cost.context_switch_frac");
  c.plan_tail = cfg.get_double("cost.plan_tail");
  c.profile = cfg.get_string("cost.profile");
  c.validate();
  return c;
}

void CostParams::validate() const {
  if (!(iter_fixed > 0.0) || iter_per_seq < 0.0 || verify_per_token < 0.0 ||
      prefill_per_token < 0.0 || prompt_len < 0) {
    throw ConfigError("cost: rollout costs must be non-negative and iter_fixed positive");
  }
  if (reward_per_sample < 0.0 || train_per_sample < 0.0 || train_fixed < 0.0) {
    throw ConfigError("cost: reward/train costs must be non-negative");
  }
  if (context_switch_frac < 0.0) throw ConfigError("cost.context_switch_frac must be >= 0");
  if (!(plan_tail > 0.0)) throw ConfigError("cost.plan_tail must be > 0");
}

SimOptions SimOptions::from_config(const Config& cfg) {
  SimOptions o;
  o.policy = parse_policy(cfg.get("sim.policy"));
  o.seed = static_cast<std::uint64_t>(cfg.get_int("sim.seed"));
  if (const char* env = std::getenv("RHYME_SIM_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end == nullptr || *end != '\0') throw ConfigError("RHYME_SIM_SEED is not an integer");
    o.seed = v;
  }
  o.steps = cfg.get_int("sim.steps");
  o.oversample_pct = cfg.get_double("sim.oversample_pct");
  o.minibatch = static_cast<int>(cfg.get_int("sim.minibatch"));
  o.migration = cfg.get_bool("sim.migration");
  o.alpha = cfg.get_double("sim.alpha");
  o.speculation = cfg.get_bool("sim.speculation");
  o.max_chunk = static_cast<int>(cfg.get_int("sim.max_chunk"));
  o.plan_precision = cfg.get_double("sim.plan_precision");
  o.spec = spec::SpecConfig::from_config(cfg);
  o.validate();
  return o;
}

void SimOptions::validate() const {
  if (steps < 0) throw ConfigError("sim.steps must be >= 0");
  if (oversample_pct < 0.0) throw ConfigError("sim.oversample_pct must be >= 0");
  if (minibatch < 1) throw ConfigError("sim.minibatch must be >= 1");
  if (!(alpha > 0.0 && alpha < 100.0)) throw ConfigError("sim.alpha must be in (0, 100)");
  if (max_chunk < 1) throw ConfigError("sim.max_chunk must be >= 1");
  if (!(plan_precision > 0.0)) throw ConfigError("sim.plan_precision must be > 0");
}

SimConfig SimConfig::from_config(const Config& cfg) {
  SimConfig c;
  c.cluster = ClusterSpec::from_config(cfg);
  c.cost = CostParams::from_config(cfg);
  c.sim = SimOptions::from_config(cfg);
  return c;
}

void SimConfig::validate() const {
  cluster.validate();
  cost.validate();
  sim.validate();
}

}  // namespace rhyme::sim
