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

#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include "rhyme/pipe/allocation.hpp"
#include "rhyme/pipe/cost_model.hpp"
#include "rhyme/sim/simulator.hpp"
#include "rhyme/trace/generator.hpp"
#include "rhyme/util/config.hpp"

namespace {

using namespace rhyme;

void BM_PlanAllocation(benchmark::State& state) {
  const int groups = static_cast<int>(state.range(0));
  std::vector<double> lens;
  for (int i = 0; i < groups; ++i) lens.push_back(200.0 * std::exp(0.4 * i));
  pipe::AnalyticCost cost({0.01, 0.0003, 0.0, 2.0, 128, 0.0});
  const int wks = groups * 4;
  for (auto _ : state) {
    auto plan = pipe::plan_allocation(lens, wks, 1.0, cost, {1, wks - groups + 1}, 0.01);
    benchmark::DoNotOptimize(plan.d);
  }
}
BENCHMARK(BM_PlanAllocation)->Arg(4)->Arg(8)->Arg(32);

void BM_Simulate(benchmark::State& state) {
  static const char* const kPolicies[] = {"colocated", "streaming", "histopipe_naive", "histopipe_two_tier"};
  Config cfg;
  cfg.apply_overrides({"trace.epochs=4", "trace.with_tokens=false"});
  const auto t = trace::generate(trace::TraceSpec::from_config(cfg));
  cfg.set("sim.policy", kPolicies[state.range(0)]);
  const auto sc = sim::SimConfig::from_config(cfg);
  for (auto _ : state) {
    auto r = sim::run(t, sc);
    benchmark::DoNotOptimize(r.metrics.makespan);
  }
  state.SetLabel(kPolicies[state.range(0)]);
}
BENCHMARK(BM_Simulate)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
