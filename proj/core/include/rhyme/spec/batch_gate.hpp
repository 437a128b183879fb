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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace rhyme::spec {

/// Profiled largest batch size at which speculation still pays off, per
/// acceptance-rate decile.
///
/// Text form: comma-separated `lower_bound:max_batch` pairs, e.g.
/// `0.0:512,0.6:4096,0.8:8192`. An entry covers the deciles from its lower
/// bound up to the next entry; deciles below the first entry use the first
/// entry. The table must not grow as acceptance falls.
class BatchGate {
 public:
  static constexpr int kBuckets = 10;

  /// Speculate up to batch 8192 at any acceptance rate.
  BatchGate();
  explicit BatchGate(const std::array<std::int64_t, kBuckets>& max_batch);

  static BatchGate parse(std::string_view text);
  [[nodiscard]] std::string to_string() const;

  [[nodiscard]] static int bucket(double acceptance);
  [[nodiscard]] std::int64_t max_batch(double acceptance) const;
  [[nodiscard]] bool allows(std::int64_t batch, double acceptance) const;

  [[nodiscard]] const std::array<std::int64_t, kBuckets>& table() const { return table_; }

 private:
  std::array<std::int64_t, kBuckets> table_{};
};

[[nodiscard]] inline bool gate_check(const BatchGate& gate, std::int64_t current_batch,
                                     double recent_acceptance) {
  return gate.allows(current_batch, recent_acceptance);
}

}  // namespace rhyme::spec
