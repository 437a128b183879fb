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
#include <vector>

#include "rhyme/spec/engine.hpp"
#include "rhyme/trace/trace.hpp"

namespace rhyme::trace {

/// Rank-prediction outcome of one epoch, in percent of its responses.
/// Groups are assigned per prompt: predicted from the previous epoch's
/// medians, real from the current ones. Every response falls into exactly
/// one category:
///  - migrated: among the longest 10% of its predicted group's current
///    responses and longer than beta times the group's longest historical
///    response, i.e. what the migration rule would move;
///  - accurate: otherwise, if its prompt's real group is not above the
///    predicted one;
///  - within_1p1x: moved up and among the longest 10%;
///  - not_last_10: moved up, outside the longest 10%.
struct RankMetrics {
  std::int64_t epoch = 0;
  std::int64_t responses = 0;
  double beta = 1.1;
  double accurate_pct = 0.0;
  double not_last_10_pct = 0.0;
  double within_1p1x_pct = 0.0;
  double migrated_pct = 0.0;
};

/// Compares `epoch` against `epoch - 1` with `num_groups` ranking groups.
/// beta is the 75th percentile of per-prompt median growth between
/// `epoch - 2` and `epoch - 1` (floored at 1.1), or 1.1 when that pair does
/// not exist. Throws InputError if either epoch is missing.
[[nodiscard]] RankMetrics rank_metrics(const Trace& trace, std::int64_t epoch, int num_groups);

/// rank_metrics for every epoch that has a predecessor, plus the mean row
/// (epoch = 0).
[[nodiscard]] std::vector<RankMetrics> rank_metrics_all(const Trace& trace, int num_groups);

/// Per-prompt median growth between two epochs.
[[nodiscard]] std::vector<double> median_growth(const Trace& trace, std::int64_t from,
                                                std::int64_t to);

struct ReplayResult {
  std::int64_t epoch = 0;
  std::int64_t accepted = 0;
  std::int64_t total = 0;
  /// Leading tokens of each response that cannot be matched because the
  /// prefix is not complete yet.
  std::int64_t warmup = 0;

  [[nodiscard]] double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(total);
  }
  [[nodiscard]] double fraction_after_warmup() const {
    const auto denom = total - warmup;
    return denom <= 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(denom);
  }
};

/// Replays every response of `epoch` token by token: the last `prefix_len`
/// generated tokens are looked up in the same prompt's responses of
/// `epoch - 1`; on a match the longest identical continuation is accepted,
/// otherwise one token is generated. Throws InputError if prefix_len < 1,
/// an epoch is missing, or the trace has no tokens.
[[nodiscard]] ReplayResult token_similarity_replay(const Trace& trace, std::int64_t epoch,
                                                   int prefix_len);

/// Runs the speculation engine over every response of `epoch` using suffix
/// trees of `epoch - 1`, at a fixed batch size for the gate.
[[nodiscard]] spec::SpecCounters engine_replay(const Trace& trace, std::int64_t epoch,
                                               const spec::SpecConfig& cfg, std::int64_t batch = 1);

}  // namespace rhyme::trace
