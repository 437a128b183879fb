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

#include "rhyme/trace/trace.hpp"

namespace rhyme {
class Config;
}

namespace rhyme::trace {

/// Parameters of a synthetic multi-epoch trace.
///
/// Lengths: a response's log-length is normal with mean `len_mu` (plus the
/// accumulated per-epoch growth) and standard deviation `len_sigma`. The
/// share `group_corr` of that variance is a per-prompt component, the rest
/// a per-slot component. Between epochs the per-prompt component is kept
/// with probability `rank_noise` and redrawn otherwise, so most prompts keep
/// their rank and a few jump; the per-slot component follows an AR(1)
/// process with the same correlation. rank_noise = 1 without growth repeats
/// the lengths exactly.
///
/// Tokens: each prompt owns a canonical sequence per epoch. The next
/// epoch's canonical copies the previous one token by token with
/// probability `similarity`, replacing the rest in bursts of geometric
/// length (mean `burst_mean`). A response is the canonical truncated to its
/// length, with a fixed per-slot set of divergent tokens (rate
/// `group_divergence`) so that group members branch.
struct TraceSpec {
  int num_prompts = 128;
  int group_size = 16;
  int epochs = 3;
  int vocab_size = 32768;
  double len_mu = 6.0;
  double len_sigma = 1.0;
  std::int64_t len_min = 8;
  std::int64_t len_max = 16384;
  double group_corr = 0.9;
  double similarity = 0.93;
  double similarity_step = 0.0;
  double burst_mean = 4.0;
  double group_divergence = 0.02;
  double growth_mu = 0.0;
  double growth_sigma = 0.05;
  double rank_noise = 0.95;
  double high_reward_frac = 0.5;
  bool with_tokens = true;
  std::uint64_t seed = 1;

  /// Reads the `trace.*` keys and validates.
  static TraceSpec from_config(const Config& cfg);
  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
  /// Copy probability between epoch `epoch` and `epoch + 1`.
  [[nodiscard]] double similarity_at(int epoch) const;
};

/// Deterministic for a fixed spec (seed included). Responses are ordered by
/// epoch, then prompt, then slot; prompt ids are `p00000`, `p00001`, ...
[[nodiscard]] Trace generate(const TraceSpec& spec);

}  // namespace rhyme::trace
