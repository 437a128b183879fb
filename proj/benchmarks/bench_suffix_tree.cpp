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
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rhyme/history/suffix_tree.hpp"
#include "rhyme/trace/generator.hpp"

namespace {

using rhyme::Response;
using rhyme::history::SuffixTree;

// One prompt's group from the generator, so the tree sees realistic overlap
// between responses.
std::vector<Response> group_of(std::int64_t mean_len) {
  rhyme::trace::TraceSpec spec;
  spec.num_prompts = 1;
  spec.epochs = 1;
  spec.len_mu = std::log(static_cast<double>(mean_len));
  spec.len_sigma = 0.3;
  return rhyme::trace::generate(spec).responses();
}

void BM_SuffixTreeBuild(benchmark::State& state) {
  const auto group = group_of(state.range(0));
  std::size_t tokens = 0;
  for (const auto& r : group) tokens += r.tokens.size();
  for (auto _ : state) {
    auto tree = SuffixTree::build("p00000", 1, group);
    benchmark::DoNotOptimize(tree.root_priority());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * tokens));
}
BENCHMARK(BM_SuffixTreeBuild)->Arg(256)->Arg(1024)->Arg(4096);

void BM_SuffixTreeDraft(benchmark::State& state) {
  const auto group = group_of(2048);
  const auto tree = SuffixTree::build("p00000", 1, group);
  const auto& probe = group.front().tokens;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pos(0, probe.size() - 4);
  const auto window = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto at = pos(rng);
    auto d = tree.draft(std::span(probe).subspan(at, 3), window);
    benchmark::DoNotOptimize(d.tokens.data());
  }
}
BENCHMARK(BM_SuffixTreeDraft)->Arg(4)->Arg(16)->Arg(64);

}  // namespace
