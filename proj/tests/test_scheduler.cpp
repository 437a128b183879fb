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

#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "rhyme/pipe/allocation.hpp"
#include "rhyme/pipe/cost_model.hpp"
#include "rhyme/pipe/grouping.hpp"
#include "rhyme/pipe/migration.hpp"
#include "rhyme/util/error.hpp"
#include "support/oracles.hpp"

namespace rhyme::pipe {
namespace {

std::vector<PromptHistory> medians(std::vector<double> m) {
  std::vector<PromptHistory> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "q%02zu", i);
    out.push_back({id, m[i], m[i] * 2});
  }
  return out;
}

TEST(Grouping, EqualSplitWithRepresentatives) {
  const auto g = build_groups(medians({8, 7, 6, 5, 4, 3, 2, 1}), 4);
  ASSERT_EQ(g.size(), 4u);
  const std::vector<double> reps{1.5, 3.5, 5.5, 7.5};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(g[i].index, static_cast<int>(i));
    EXPECT_EQ(g[i].prompt_ids.size(), 2u);
    EXPECT_DOUBLE_EQ(g[i].representative_len, reps[i]);
  }
  EXPECT_EQ(g[0].prompt_ids, (std::vector<std::string>{"q07", "q06"}));
  EXPECT_DOUBLE_EQ(g[3].max_hist_len, 16.0);
}

TEST(Grouping, RemainderGoesToLongest) {
  const auto g = build_groups(medians({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 4);
  std::vector<std::size_t> sizes;
  for (const auto& x : g) sizes.push_back(x.prompt_ids.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 3, 3}));
}

TEST(Grouping, TiesBreakByPromptId) {
  const auto g = build_groups(medians({5, 5, 5, 5}), 2);
  EXPECT_EQ(g[0].prompt_ids, (std::vector<std::string>{"q00", "q01"}));
  EXPECT_EQ(g[1].prompt_ids, (std::vector<std::string>{"q02", "q03"}));
}

TEST(Grouping, PartitionAndOrderOnRandomInput) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 200; ++round) {
    const int n = 2 + static_cast<int>(rng() % 8);
    std::vector<double> m(static_cast<std::size_t>(n) + rng() % 60);
    for (auto& v : m) v = static_cast<double>(rng() % 50);
    const auto groups = build_groups(medians(m), n);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (const auto& p : groups[i].prompt_ids) EXPECT_TRUE(seen.insert(p).second);
      if (i > 0) EXPECT_GE(groups[i].representative_len, groups[i - 1].representative_len);
    }
    EXPECT_EQ(seen.size(), m.size());
  }
}

TEST(Grouping, Errors) {
  EXPECT_THROW((void)build_groups(medians({1, 2, 3}), 4), InputError);
  EXPECT_THROW((void)build_groups(medians({1, 2, 3}), 1), InputError);
  EXPECT_THROW((void)assignment_order(0, 4), InputError);
}

TEST(AssignmentOrder, AlternatesDirection) {
  EXPECT_EQ(assignment_order(1, 4), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(assignment_order(2, 4), (std::vector<int>{3, 2, 1, 0}));
  for (int n = 1; n <= 9; ++n) {
    for (std::int64_t k = 1; k <= 6; ++k) {
      const auto a = assignment_order(k, n);
      const auto b = assignment_order(k + 1, n);
      for (std::size_t s = 0; s < a.size(); ++s) EXPECT_EQ(a[s] + b[s], n - 1);
    }
  }
}

TEST(Percentiles, NearestRankAndMedian) {
  const std::vector<double> v{1.0, 1.2, 1.4, 1.6};
  EXPECT_DOUBLE_EQ(nearest_rank(v, 75.0), 1.4);
  EXPECT_DOUBLE_EQ(nearest_rank(v, 100.0), 1.6);
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Beta, FloorAndPercentile) {
  EXPECT_DOUBLE_EQ(beta_from_history(std::vector<double>{1.0, 1.0, 1.0}), 1.1);
  EXPECT_DOUBLE_EQ(beta_from_history(std::vector<double>{1.0, 1.2, 1.4, 1.6}), 1.4);
  EXPECT_DOUBLE_EQ(beta_from_history(std::vector<double>{2.0}), 2.0);
  EXPECT_DOUBLE_EQ(beta_from_history({}), 1.1);
}

const FunctionCost kRatio([](double l, int k) { return l / k; });

TEST(CalWks, HandEvaluated) {
  const std::vector<double> lens{10, 20};
  const auto r = cal_wks(10, lens, 8, 10, kRatio, {1, 4});
  ASSERT_TRUE(r.workers_needed.has_value());
  EXPECT_EQ(*r.workers_needed, 2);
  EXPECT_EQ(r.plan, (std::vector<int>{1, 1}));
  const auto bad = cal_wks(0, lens, 8, 1, kRatio, {1, 4});
  EXPECT_FALSE(bad.workers_needed.has_value());
  EXPECT_TRUE(bad.plan.empty());
  const auto wide = cal_wks(1000, std::vector<double>{10, 20, 40}, 8, 10, kRatio, {2, 4});
  EXPECT_EQ(wide.plan, (std::vector<int>{2, 2, 2}));
}

TEST(PlanAllocation, SmallInstanceMatchesExhaustiveSearch) {
  const std::vector<double> lens{8, 16, 32, 64};
  const auto plan = plan_allocation(lens, 10, 0.0, kRatio, {1, 6}, 0.01);
  ASSERT_TRUE(plan.feasible);
  EXPECT_DOUBLE_EQ(plan.t0, 8.0 / 6.0);
  const double best = oracle::optimal_gradient(kRatio, lens, 10, plan.t0, 1, 6);
  EXPECT_GE(plan.d, best - 1e-9);
  EXPECT_LE(plan.d, best + 0.01 + 1e-9);
  int sum = 0;
  for (const int k : plan.per_group_workers) sum += k;
  EXPECT_LE(sum, 10);
}

TEST(PlanAllocation, TrainTimeSetsFloor) {
  const std::vector<double> lens{8, 16, 32, 64};
  const auto plan = plan_allocation(lens, 10, 5.0, kRatio, {1, 6}, 0.01);
  EXPECT_DOUBLE_EQ(plan.t0, 5.0);
}

TEST(PlanAllocation, ManyWorkersFlattenTargets) {
  // Budget for every group at max_wks: d only has to absorb the spread of
  // tau(l, max_wks), here (0.1 - 0.08) / 2.
  const std::vector<double> lens{8, 9, 10};
  const auto plan = plan_allocation(lens, 1000, 0.0, kRatio, {1, 100}, 0.001);
  ASSERT_TRUE(plan.feasible);
  EXPECT_LE(plan.d, 0.01 + 0.001 + 1e-9);
  for (std::size_t i = 0; i < lens.size(); ++i) {
    EXPECT_LE(plan.predicted_times[i], plan.t0 + static_cast<double>(i) * plan.d + 1e-9);
  }
}

TEST(PlanAllocation, RandomInstancesWithinPrecisionOfOptimum) {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 300; ++round) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const int max_wks = 1 + static_cast<int>(rng() % 6);
    const int min_wks = 1 + static_cast<int>(rng() % max_wks);
    const int wks = n * min_wks + static_cast<int>(rng() % (21 - n * min_wks > 0 ? 21 - n * min_wks : 1));
    const double p = std::vector<double>{0.01, 0.1, 1.0}[rng() % 3];
    const auto table = oracle::random_tau(rng, n, max_wks);
    const FunctionCost model([&](double l, int k) { return table.tau(l, k); });
    std::vector<double> lens(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) lens[static_cast<std::size_t>(i)] = i;
    const double t_train = (rng() % 3 == 0) ? static_cast<double>(rng() % 40) : 0.0;

    const auto plan = plan_allocation(lens, wks, t_train, model, {min_wks, max_wks}, p);
    const double best = oracle::optimal_gradient(model, lens, wks, plan.t0, min_wks, max_wks);
    const double d_limit = std::max(0.0, (model.tau(lens.back(), min_wks) - plan.t0) / (n - 1));
    if (best <= d_limit + 1e-12) {
      ASSERT_TRUE(plan.feasible) << "round " << round;
      EXPECT_GE(plan.d, best - 1e-9);
      EXPECT_LE(plan.d, best + p + 1e-9);
      const auto check = cal_wks(plan.d, lens, wks, plan.t0, model, {min_wks, max_wks});
      ASSERT_TRUE(check.workers_needed.has_value());
      EXPECT_LE(*check.workers_needed, wks);
      EXPECT_EQ(check.plan, plan.per_group_workers);
      for (int i = 0; i < n; ++i) {
        const auto k = plan.per_group_workers[static_cast<std::size_t>(i)];
        EXPECT_GE(k, min_wks);
        EXPECT_LE(k, max_wks);
        EXPECT_LE(plan.predicted_times[static_cast<std::size_t>(i)], plan.t0 + i * plan.d + 1e-9);
      }
    } else {
      EXPECT_FALSE(plan.feasible) << "round " << round;
    }
  }
}

TEST(PlanAllocation, Errors) {
  EXPECT_THROW((void)plan_allocation(std::vector<double>{5}, 4, 0, kRatio, {1, 4}), InputError);
  EXPECT_THROW((void)plan_allocation(std::vector<double>{5, 1}, 4, 0, kRatio, {1, 3}), InputError);
  EXPECT_THROW((void)plan_allocation(std::vector<double>{1, 5}, 1, 0, kRatio, {1, 1}), InputError);
  EXPECT_THROW((void)plan_allocation(std::vector<double>{1, 5}, 4, 0, kRatio, {3, 2}), InputError);
}

TEST(PlanAllocation, JsonShape) {
  const auto plan = plan_allocation(std::vector<double>{8, 16, 32, 64}, 10, 0.0, kRatio, {1, 6}, 0.01);
  const auto j = nlohmann::json::parse(to_json(plan));
  EXPECT_EQ(j.at("per_group_workers").get<std::vector<int>>(), plan.per_group_workers);
  EXPECT_TRUE(j.at("feasible").get<bool>());
  EXPECT_DOUBLE_EQ(j.at("d").get<double>(), plan.d);
}

TEST(CostModel, AnalyticIsMonotone) {
  AnalyticCostParams p;
  p.batch = 17;
  const AnalyticCost model(p);
  for (int k = 1; k < 20; ++k) {
    EXPECT_GE(model.tau(500, k), model.tau(500, k + 1));
    EXPECT_LE(model.tau(500, k), model.tau(501, k));
  }
  p.accepted_per_pass = 1.0;
  EXPECT_NEAR(AnalyticCost(p).tau(500, 3), model.tau(500, 3) / 2.0, 1e-12);
  p.per_pass = -1;
  EXPECT_THROW(AnalyticCost{p}, ConfigError);
}

TEST(CostModel, ProfileInterpolates) {
  const auto m = ProfileCost::parse_csv(
      "len,dp,seconds\n# profiled\n100,1,10\n100,2,6\n200,1,20\n200,2,12\n");
  EXPECT_DOUBLE_EQ(m.tau(100, 1), 10.0);
  EXPECT_DOUBLE_EQ(m.tau(150, 2), 9.0);
  EXPECT_DOUBLE_EQ(m.tau(150, 8), 9.0);  // dp clamped
  EXPECT_DOUBLE_EQ(m.tau(400, 1), 40.0);
  EXPECT_DOUBLE_EQ(m.tau(50, 1), 5.0);
  EXPECT_THROW((void)ProfileCost::parse_csv("100,1,10\n100,2,12\n"), ConfigError);
  EXPECT_THROW((void)ProfileCost::parse_csv("100,1,10\n200,2,12\n"), ConfigError);
  EXPECT_THROW((void)ProfileCost::parse_csv("100,1,x\n"), ConfigError);
}

TEST(Migration, BothConditionsRequired) {
  MigrationPolicy policy;
  const std::vector<GroupLoad> others{{1, 3.0, true}, {2, 1.0, true}, {3, 0.5, false}};
  GroupState g{0, 4, 100, 10, 1000.0};
  auto d = migration_decision(g, 1200.0, others, policy);
  EXPECT_EQ(d.kind, MigrationKind::intra_step);
  EXPECT_EQ(d.target_group, 2);
  g.remaining = 50;
  EXPECT_EQ(migration_decision(g, 1200.0, others, policy).kind, MigrationKind::none);
  g.remaining = 10;
  EXPECT_EQ(migration_decision(g, 1100.0, others, policy).kind, MigrationKind::none);
}

TEST(Migration, LongGroupsDeferToNextStep) {
  MigrationPolicy policy;
  const std::vector<GroupLoad> others{{0, 1.0, true}};
  const GroupState g{3, 4, 100, 5, 100.0};
  EXPECT_EQ(migration_decision(g, 500.0, others, policy).kind, MigrationKind::inter_step);
  EXPECT_EQ(migration_decision(g, 500.0, others, policy, false).kind, MigrationKind::none);
  // A short group with nobody to take the rollout also defers.
  const GroupState s{0, 4, 100, 5, 100.0};
  const std::vector<GroupLoad> idle{{1, 0.0, false}};
  EXPECT_EQ(migration_decision(s, 500.0, idle, policy).kind, MigrationKind::inter_step);
}

TEST(Migration, TailWindow) {
  EXPECT_TRUE(in_tail(10, 100, 10.0));
  EXPECT_FALSE(in_tail(11, 100, 10.0));
  EXPECT_TRUE(in_tail(1, 5, 10.0));
  EXPECT_FALSE(in_tail(2, 5, 10.0));
  MigrationPolicy bad;
  bad.beta = 1.0;
  EXPECT_FALSE(bad.valid());
}

}  // namespace
}  // namespace rhyme::pipe
