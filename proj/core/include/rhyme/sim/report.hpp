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

#include <string>
#include <string_view>
#include <vector>

#include "rhyme/sim/simulator.hpp"

namespace rhyme::sim {

inline constexpr std::string_view kRunSchema = "rhyme.run/1";
inline constexpr std::string_view kReportSchema = "rhyme.report/1";
inline constexpr std::string_view kEventSchema = "rhyme.events/1";

/// Run summary as JSON, re-readable by parse_run_json without loss.
[[nodiscard]] std::string run_json(const MetricsReport& m, bool pretty = false);
/// Throws InputError on malformed input or a schema mismatch.
[[nodiscard]] MetricsReport parse_run_json(std::string_view text);

/// One row per run; throughput normalized to the first run.
[[nodiscard]] std::string comparison_csv(const std::vector<MetricsReport>& runs);
[[nodiscard]] std::string comparison_json(const std::vector<MetricsReport>& runs,
                                          bool pretty = false);
/// Human-readable table of the comparison.
[[nodiscard]] std::string comparison_table(const std::vector<MetricsReport>& runs);

/// `worker_id,start,end,activity`
[[nodiscard]] std::string timeline_csv(const std::vector<TimelineRow>& rows);

/// Per-step speculation counters in the engine's stats CSV layout.
[[nodiscard]] std::string spec_stats_csv(const MetricsReport& m);

}  // namespace rhyme::sim
