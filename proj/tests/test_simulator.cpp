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

#include <gtest/gtest.h>

#include <map>
#include <set>

#include <json.hpp>

#include "rhyme/sim/report.hpp"
#include "rhyme/sim/simulator.hpp"
#include "rhyme/trace/generator.hpp"
#include "rhyme/util/config.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::sim {
namespace {

trace::Trace length_trace(int epochs = 6, double sigma = 1.0, std::uint64_t seed = 3) {
  trace::TraceSpec s;
  s.num_prompts = 48;
  s.group_size = 8;
  s.epochs = epochs;
  s.len_sigma = sigma;
  s.with_tokens = false;
  s.seed = seed;
  return trace::generate(s);
}

SimConfig small_config(Policy p, std::vector<std::string> overrides = {}) {
  Config cfg;
  cfg.apply_overrides({"cluster.rollout_workers=8", "cluster.reward_workers=2", "cluster.n_groups=4",
                       "cluster.prompts_per_step=16", "sim.minibatch=32"});
  cfg.apply_overrides(overrides);
  auto c = SimConfig::from_config(cfg);
  c.sim.policy = p;
  return c;
}

constexpr Policy kAll[] = {Policy::colocated, Policy::streaming, Policy::histopipe_naive,
                           Policy::histopipe_two_tier};

// Id accounting, causality and weight versions, all read off the event log.
void check_log(const SimResult& r, Policy p) {
  std::map<std::string, int> finishes;
  std::map<std::string, double> finish_time;
  std::map<std::string, std::int64_t> finish_step;
  std::map<std::string, int> rewards;
  std::map<std::int64_t, std::int64_t> rewarded_in_step;
  std::set<std::string> inter;
  double last = 0.0;
  for (const auto& e : r.events) {
    ASSERT_GE(e.time, last);
    last = e.time;
    switch (e.kind) {
      case EventKind::rollout_finish:
        ++finishes[e.sample];
        finish_time[e.sample] = e.time;
        finish_step[e.sample] = e.step;
        // One step off-policy, except the on-policy colocated baseline.
        EXPECT_EQ(e.weight_version, p == Policy::colocated ? e.step : e.step - 1) << e.sample;
        break;
      case EventKind::migration:
        EXPECT_TRUE(is_histopipe(p));
        if (e.detail.rfind("inter_step", 0) == 0) inter.insert(e.sample);
        break;
      case EventKind::reward_done:
        ++rewards[e.sample];
        ASSERT_TRUE(finish_time.contains(e.sample)) << "reward before rollout: " << e.sample;
        EXPECT_GE(e.time, finish_time[e.sample]);
        ++rewarded_in_step[e.step];
        break;
      case EventKind::train_done: {
        const auto n = std::stoll(e.detail.substr(e.detail.find(':') + 1));
        EXPECT_EQ(rewarded_in_step[e.step], n) << "train before its batch, step " << e.step;
        break;
      }
      default:
        break;
    }
  }
  for (const auto& [id, n] : finishes) {
    EXPECT_EQ(n, 1) << id;
    EXPECT_EQ(rewards[id], 1) << id;
  }
  // Sample ids are prompt/epoch/slot; every prompt of every trained step is
  // present exactly once.
  EXPECT_EQ(static_cast<std::int64_t>(finishes.size()), r.metrics.samples);
  for (const auto& id : inter) EXPECT_TRUE(finish_step.contains(id));
  EXPECT_TRUE(r.metrics.conservation_ok);
}

TEST(Simulator, InvariantsHoldForEveryPolicy) {
  const auto t = length_trace();
  for (const auto p : kAll) {
    SCOPED_TRACE(std::string(to_string(p)));
    const auto r = run(t, small_config(p));
    check_log(r, p);
    EXPECT_GT(r.metrics.samples_per_second, 0.0);
    EXPECT_EQ(r.metrics.samples, 48 * 8 * 6);
    EXPECT_NEAR(r.metrics.rollout_share + r.metrics.reward_share + r.metrics.train_share, 1.0, 1e-3);
  }
}

TEST(Simulator, DeterministicEventLog) {
  const auto t = length_trace();
  for (const auto p : kAll) {
    const auto a = run(t, small_config(p));
    const auto b = run(t, small_config(p));
    EXPECT_EQ(events_jsonl(a.events), events_jsonl(b.events));
    EXPECT_EQ(run_json(a.metrics), run_json(b.metrics));
  }
}

TEST(Simulator, BubbleAccountingFromTimeline) {
  const auto t = length_trace();
  for (const auto p : kAll) {
    const auto r = run(t, small_config(p));
    std::map<std::string, double> busy;
    for (const auto& row : r.timeline) {
      EXPECT_LE(row.start, row.end);
      if (row.worker.rfind("rollout-", 0) == 0) busy[row.worker] += row.end - row.start;
    }
    ASSERT_EQ(r.metrics.worker_bubble.size(), 8u);
    double total = 0.0;
    for (int w = 0; w < 8; ++w) {
      const double b = busy["rollout-" + std::to_string(w)];
      const double idle = r.metrics.worker_bubble[static_cast<std::size_t>(w)] * r.metrics.makespan;
      total += b + idle;
    }
    EXPECT_NEAR(total, 8 * r.metrics.makespan, 1e-6 * r.metrics.makespan);
  }
}

TEST(Simulator, UniformLengthsLeaveNoRolloutBubble) {
  trace::TraceSpec s;
  s.num_prompts = 32;
  s.group_size = 8;
  s.epochs = 3;
  s.len_sigma = 0.0;
  s.growth_sigma = 0.0;
  s.with_tokens = false;
  const auto t = trace::generate(s);
  const auto r = run(t, small_config(Policy::streaming, {"cost.train_fixed=0", "cost.train_per_sample=0",
                                                        "cost.reward_per_sample=0",
                                                        "cluster.weight_propagation_delay=0"}));
  EXPECT_LT(r.metrics.bubble_fraction, 0.01);
  EXPECT_LT(r.metrics.earliest_idle_fraction, 0.01);
}

TEST(Simulator, MigrationsHappenAndStayConsistent) {
  const auto t = length_trace(8, 1.2, 9);
  const auto r = run(t, small_config(Policy::histopipe_two_tier));
  std::int64_t intra = 0, inter = 0;
  for (const auto& s : r.metrics.per_step) {
    intra += s.migrated_intra;
    inter += s.migrated_inter;
  }
  EXPECT_GT(intra + inter, 0);
  EXPECT_GT(r.metrics.migration_pct, 0.0);
  check_log(r, Policy::histopipe_two_tier);
}

TEST(Simulator, MigrationCanBeDisabled) {
  const auto t = length_trace(8, 1.2, 9);
  const auto r = run(t, small_config(Policy::histopipe_two_tier, {"sim.migration=false"}));
  EXPECT_DOUBLE_EQ(r.metrics.migration_pct, 0.0);
  for (const auto& e : r.events) EXPECT_NE(e.kind, EventKind::migration);
}

TEST(Simulator, StepsOptionTruncates) {
  const auto r = run(length_trace(), small_config(Policy::streaming, {"sim.steps=5"}));
  EXPECT_EQ(r.metrics.steps, 5);
  EXPECT_EQ(r.metrics.per_step.size(), 5u);
}

trace::Trace token_trace(double s) {
  trace::TraceSpec spec;
  spec.num_prompts = 32;
  spec.group_size = 4;
  spec.epochs = 3;
  spec.len_mu = 5.0;
  spec.len_sigma = 0.6;
  spec.similarity = s;
  spec.rank_noise = 1.0;
  spec.growth_sigma = 0.0;
  return trace::generate(spec);
}

TEST(Simulator, SpeculationShortensRolloutWithoutChangingSamples) {
  const auto t = token_trace(0.9);
  const auto plain = run(t, small_config(Policy::histopipe_two_tier));
  const auto spec = run(t, small_config(Policy::histopipe_two_tier, {"sim.speculation=true"}));
  EXPECT_EQ(plain.metrics.samples, spec.metrics.samples);
  EXPECT_GT(spec.metrics.acceptance_rate, 0.5);
  EXPECT_LT(spec.metrics.makespan, plain.metrics.makespan);
  check_log(spec, Policy::histopipe_two_tier);
}

TEST(Simulator, RejectsUnusableTraces) {
  EXPECT_THROW((void)run(length_trace(), small_config(Policy::streaming, {"sim.speculation=true"})),
               InputError);
  EXPECT_THROW((void)run(length_trace(1), small_config(Policy::histopipe_naive)), InputError);
}

TEST(Simulator, ConfigValidation) {
  Config cfg;
  cfg.set("cluster.n_groups", "9");
  cfg.set("cluster.rollout_workers", "8");
  EXPECT_THROW((void)SimConfig::from_config(cfg), ConfigError);
  EXPECT_THROW((void)parse_policy("fastest"), ConfigError);
  EXPECT_EQ(parse_policy("histopipe_two_tier"), Policy::histopipe_two_tier);
}

TEST(Report, RunJsonRoundTrip) {
  const auto r = run(length_trace(), small_config(Policy::histopipe_naive));
  const auto text = run_json(r.metrics);
  const auto back = parse_run_json(text);
  EXPECT_EQ(run_json(back), text);
  EXPECT_EQ(run_json(parse_run_json(run_json(r.metrics, true))), text);
  EXPECT_THROW((void)parse_run_json("{\"schema\":\"other/1\"}"), InputError);
  EXPECT_THROW((void)parse_run_json("not json"), InputError);
}

TEST(Report, ComparisonNormalizesToFirstRun) {
  const auto t = length_trace();
  const auto a = run(t, small_config(Policy::colocated)).metrics;
  const auto b = run(t, small_config(Policy::histopipe_naive)).metrics;
  const auto single = comparison_csv({a});
  EXPECT_NE(single.find(",1.000000,"), std::string::npos);
  EXPECT_EQ(comparison_csv({a, b}), comparison_csv({a, b}));
  const auto j = nlohmann::json::parse(comparison_json({a, b}));
  const auto& runs = j.at("runs");
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_NEAR(runs[1].at("normalized_throughput").get<double>(),
              b.samples_per_second / a.samples_per_second, 1e-9);
  EXPECT_NE(comparison_table({a, b}).find("histopipe_naive"), std::string::npos);
}

TEST(Report, TimelineCsvHeader) {
  const auto r = run(length_trace(), small_config(Policy::streaming));
  const auto csv = timeline_csv(r.timeline);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "worker_id,start,end,activity");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.timeline.size() + 1);
}

}  // namespace
}  // namespace rhyme::sim
