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
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

namespace rhyme::pipe {

/// Execution time of a ranking group, tau(l, dp): representative response
/// length `len` served by `dp` data-parallel rollout workers. Must be
/// non-increasing in dp and non-decreasing in len.
class CostModel {
 public:
  virtual ~CostModel() = default;
  [[nodiscard]] virtual double tau(double len, int dp) const = 0;
};

class FunctionCost final : public CostModel {
 public:
  explicit FunctionCost(std::function<double(double, int)> fn) : fn_(std::move(fn)) {}
  [[nodiscard]] double tau(double len, int dp) const override { return fn_(len, dp); }

 private:
  std::function<double(double, int)> fn_;
};

/// tau(l, dp) = l * (tail * per_pass + per_seq * ceil(batch / dp)) / (1 + accepted_per_pass) + fixed
///
/// `batch` is the number of rollouts in the group. `tail` inflates the
/// batch-independent term because a group runs until its longest response
/// ends, not its representative one. `accepted_per_pass` is the mean number
/// of accepted draft tokens per forward pass observed recently (0 without
/// speculation).
struct AnalyticCostParams {
  double per_pass = 0.01;
  double per_seq = 0.0003;
  double fixed = 0.0;
  double tail = 2.0;
  std::int64_t batch = 1;
  double accepted_per_pass = 0.0;
};

class AnalyticCost final : public CostModel {
 public:
  explicit AnalyticCost(AnalyticCostParams p);
  [[nodiscard]] double tau(double len, int dp) const override;
  [[nodiscard]] const AnalyticCostParams& params() const { return p_; }

 private:
  AnalyticCostParams p_;
};

/// Pre-profiled table, CSV `len,dp,seconds` on a full grid, bilinearly
/// interpolated. Outside the length range time scales linearly with length;
/// dp is clamped to the profiled range.
class ProfileCost final : public CostModel {
 public:
  static ProfileCost parse_csv(std::string_view text);
  static ProfileCost load_csv(const std::filesystem::path& path);

  [[nodiscard]] double tau(double len, int dp) const override;

 private:
  std::vector<double> lens_;
  std::vector<double> dps_;
  std::vector<double> seconds_;  // row-major [len][dp]

  [[nodiscard]] double at(std::size_t li, std::size_t di) const {
    return seconds_[li * dps_.size() + di];
  }
  [[nodiscard]] double along_dp(std::size_t li, double dp) const;
};

}  // namespace rhyme::pipe
