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

#include "rhyme/pipe/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "rhyme/util/error.hpp"
#include "rhyme/util/io.hpp"

namespace rhyme::pipe {

AnalyticCost::AnalyticCost(AnalyticCostParams p) : p_(p) {
  if (p_.batch < 1 || p_.per_pass < 0 || p_.per_seq < 0 || p_.tail <= 0 ||
      p_.accepted_per_pass < 0) {
    throw ConfigError("analytic cost model: invalid parameters");
  }
}

double AnalyticCost::tau(double len, int dp) const {
  dp = std::max(dp, 1);
  const auto per_worker = (p_.batch + dp - 1) / dp;
  const double per_token = p_.tail * p_.per_pass + p_.per_seq * static_cast<double>(per_worker);
  return len * per_token / (1.0 + p_.accepted_per_pass) + p_.fixed;
}

ProfileCost ProfileCost::parse_csv(std::string_view text) {
  std::map<std::pair<double, double>, double> cells;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_of("0123456789") != 0) continue;  // header
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',')) {
      throw ConfigError("profile line " + std::to_string(line_no) + ": expected len,dp,seconds");
    }
    try {
      cells[{std::stod(a), std::stod(b)}] = std::stod(c);
    } catch (const std::logic_error&) {
      throw ConfigError("profile line " + std::to_string(line_no) + ": not numeric");
    }
  }
  ProfileCost out;
  for (const auto& [key, v] : cells) {
    if (out.lens_.empty() || out.lens_.back() != key.first) out.lens_.push_back(key.first);
    if (std::find(out.dps_.begin(), out.dps_.end(), key.second) == out.dps_.end()) {
      out.dps_.push_back(key.second);
    }
  }
  std::sort(out.dps_.begin(), out.dps_.end());
  if (out.lens_.empty()) throw ConfigError("profile table is empty");
  for (const auto l : out.lens_) {
    for (const auto d : out.dps_) {
      const auto it = cells.find({l, d});
      if (it == cells.end()) throw ConfigError("profile table is not a full len x dp grid");
      out.seconds_.push_back(it->second);
    }
  }
  for (std::size_t i = 0; i < out.lens_.size(); ++i) {
    for (std::size_t j = 0; j < out.dps_.size(); ++j) {
      if (j > 0 && out.at(i, j) > out.at(i, j - 1)) {
        throw ConfigError("profile: time must not increase with dp");
      }
      if (i > 0 && out.at(i, j) < out.at(i - 1, j)) {
        throw ConfigError("profile: time must not decrease with len");
      }
    }
  }
  return out;
}

ProfileCost ProfileCost::load_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path));
}

double ProfileCost::along_dp(std::size_t li, double dp) const {
  if (dp <= dps_.front()) return at(li, 0);
  if (dp >= dps_.back()) return at(li, dps_.size() - 1);
  const auto hi = static_cast<std::size_t>(
      std::upper_bound(dps_.begin(), dps_.end(), dp) - dps_.begin());
  const auto lo = hi - 1;
  const double f = (dp - dps_[lo]) / (dps_[hi] - dps_[lo]);
  return at(li, lo) + f * (at(li, hi) - at(li, lo));
}

double ProfileCost::tau(double len, int dp) const {
  const double d = static_cast<double>(std::max(dp, 1));
  if (lens_.size() == 1 || len <= lens_.front()) {
    return along_dp(0, d) * (lens_.front() > 0 ? len / lens_.front() : 1.0);
  }
  if (len >= lens_.back()) {
    return along_dp(lens_.size() - 1, d) * (len / lens_.back());
  }
  const auto hi = static_cast<std::size_t>(
      std::upper_bound(lens_.begin(), lens_.end(), len) - lens_.begin());
  const auto lo = hi - 1;
  const double f = (len - lens_[lo]) / (lens_[hi] - lens_[lo]);
  return along_dp(lo, d) + f * (along_dp(hi, d) - along_dp(lo, d));
}

}  // namespace rhyme::pipe
