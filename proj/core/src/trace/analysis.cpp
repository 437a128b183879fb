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

#include "rhyme/trace/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "rhyme/history/suffix_tree.hpp"
#include "rhyme/pipe/grouping.hpp"
#include "rhyme/pipe/migration.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::trace {
namespace {

void require_epoch(const Trace& trace, std::int64_t epoch) {
  if (!trace.has_epoch(epoch)) throw InputError("epoch " + std::to_string(epoch) + " not in trace");
}

std::vector<double> lengths_of(const Trace& trace, std::int64_t epoch, const std::string& prompt) {
  std::vector<double> out;
  for (const auto i : trace.group(epoch, prompt)) {
    out.push_back(static_cast<double>(trace.responses()[i].length));
  }
  return out;
}

std::uint64_t hash_tokens(std::span<const TokenId> t) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto v : t) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<double> median_growth(const Trace& trace, std::int64_t from, std::int64_t to) {
  std::vector<double> out;
  for (const auto& p : trace.prompts_in(to)) {
    const double before = pipe::median(lengths_of(trace, from, p));
    if (before <= 0.0) continue;
    out.push_back(pipe::median(lengths_of(trace, to, p)) / before);
  }
  return out;
}

RankMetrics rank_metrics(const Trace& trace, std::int64_t epoch, int num_groups) {
  require_epoch(trace, epoch);
  require_epoch(trace, epoch - 1);
  const auto& rs = trace.responses();

  const auto histories = [&](std::int64_t e) {
    std::vector<pipe::PromptHistory> out;
    for (const auto& p : trace.prompts_in(epoch)) {
      auto lens = lengths_of(trace, e, p);
      if (lens.empty()) continue;
      const double mx = *std::max_element(lens.begin(), lens.end());
      out.push_back({p, pipe::median(std::move(lens)), mx});
    }
    return out;
  };
  const auto groups = pipe::build_groups(histories(epoch - 1), num_groups);
  std::map<std::string, int, std::less<>> real_group;
  for (const auto& g : pipe::build_groups(histories(epoch), num_groups)) {
    for (const auto& p : g.prompt_ids) real_group[p] = g.index;
  }

  RankMetrics m;
  m.epoch = epoch;
  if (trace.has_epoch(epoch - 2)) {
    m.beta = pipe::beta_from_history(median_growth(trace, epoch - 2, epoch - 1));
  }

  std::int64_t accurate = 0, not_last = 0, within = 0, migrated = 0;
  for (const auto& g : groups) {
    std::vector<std::size_t> idx;
    for (const auto& p : g.prompt_ids) {
      for (const auto i : trace.group(epoch, p)) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return rs[a].length > rs[b].length; });
    const auto tail = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& r = rs[idx[k]];
      const bool last = k < tail;
      if (last && static_cast<double>(r.length) > m.beta * g.max_hist_len) {
        ++migrated;
      } else if (real_group.at(r.prompt_id) <= g.index) {
        ++accurate;
      } else if (last) {
        ++within;
      } else {
        ++not_last;
      }
    }
  }
  const auto n = accurate + not_last + within + migrated;
  m.responses = n;
  if (n == 0) return m;
  const double scale = 100.0 / static_cast<double>(n);
  m.accurate_pct = accurate * scale;
  m.not_last_10_pct = not_last * scale;
  m.within_1p1x_pct = within * scale;
  m.migrated_pct = migrated * scale;
  return m;
}

std::vector<RankMetrics> rank_metrics_all(const Trace& trace, int num_groups) {
  std::vector<RankMetrics> out;
  RankMetrics mean;
  for (const auto e : trace.epochs()) {
    if (!trace.has_epoch(e - 1)) continue;
    out.push_back(rank_metrics(trace, e, num_groups));
    const auto& r = out.back();
    mean.responses += r.responses;
    mean.accurate_pct += r.accurate_pct;
    mean.not_last_10_pct += r.not_last_10_pct;
    mean.within_1p1x_pct += r.within_1p1x_pct;
    mean.migrated_pct += r.migrated_pct;
  }
  if (!out.empty()) {
    const auto k = static_cast<double>(out.size());
    mean.beta = 0.0;
    for (const auto& r : out) mean.beta += r.beta / k;
    mean.accurate_pct /= k;
    mean.not_last_10_pct /= k;
    mean.within_1p1x_pct /= k;
    mean.migrated_pct /= k;
    out.push_back(mean);
  }
  return out;
}

ReplayResult token_similarity_replay(const Trace& trace, std::int64_t epoch, int prefix_len) {
  if (prefix_len < 1) throw InputError("prefix length must be >= 1");
  require_epoch(trace, epoch);
  require_epoch(trace, epoch - 1);
  if (!trace.has_tokens()) throw InputError("similarity replay needs token traces");
  const auto& rs = trace.responses();
  const auto plen = static_cast<std::size_t>(prefix_len);

  ReplayResult out;
  out.epoch = epoch;
  for (const auto& p : trace.prompts_in(epoch)) {
    // n-gram -> (response, position right after the n-gram)
    std::unordered_map<std::uint64_t, std::vector<std::pair<std::size_t, std::size_t>>> index;
    for (const auto h : trace.group(epoch - 1, p)) {
      const auto& t = rs[h].tokens;
      for (std::size_t end = plen; end <= t.size(); ++end) {
        index[hash_tokens(std::span(t).subspan(end - plen, plen))].emplace_back(h, end);
      }
    }
    for (const auto c : trace.group(epoch, p)) {
      const std::span<const TokenId> cur(rs[c].tokens);
      out.total += static_cast<std::int64_t>(cur.size());
      out.warmup += static_cast<std::int64_t>(std::min(plen, cur.size()));
      std::size_t i = plen;
      while (i < cur.size()) {
        const auto prefix = cur.subspan(i - plen, plen);
        std::size_t best = 0;
        bool found = false;
        if (const auto it = index.find(hash_tokens(prefix)); it != index.end()) {
          for (const auto& [h, end] : it->second) {
            const std::span<const TokenId> hist(rs[h].tokens);
            if (!std::equal(prefix.begin(), prefix.end(), hist.begin() + static_cast<std::ptrdiff_t>(end - plen))) {
              continue;
            }
            found = true;
            std::size_t m = 0;
            while (end + m < hist.size() && i + m < cur.size() && hist[end + m] == cur[i + m]) ++m;
            best = std::max(best, m);
          }
        }
        if (found && best > 0) {
          out.accepted += static_cast<std::int64_t>(best);
          i += best;
        } else {
          ++i;
        }
      }
    }
  }
  return out;
}

spec::SpecCounters engine_replay(const Trace& trace, std::int64_t epoch, const spec::SpecConfig& cfg,
                                 std::int64_t batch) {
  require_epoch(trace, epoch);
  require_epoch(trace, epoch - 1);
  if (!trace.has_tokens()) throw InputError("engine replay needs token traces");
  const auto& rs = trace.responses();
  spec::SpecCounters total;
  for (const auto& p : trace.prompts_in(epoch)) {
    std::vector<Response> prev;
    for (const auto h : trace.group(epoch - 1, p)) prev.push_back(rs[h]);
    const auto tree = history::SuffixTree::build(p, epoch - 1, prev);
    for (const auto c : trace.group(epoch, p)) {
      spec::ResponseState state(rs[c].tokens, cfg);
      spec::StepContext ctx;
      ctx.tree = &tree;
      ctx.gate = &cfg.gate;
      ctx.batch = batch;
      ctx.enabled = cfg.enabled;
      while (!state.done()) {
        spec::step_response(state, ctx);
        ctx.recent_acceptance = state.counters.tokens_speculated > 0
                                    ? state.counters.acceptance_rate()
                                    : 1.0;
      }
      total += state.counters;
    }
  }
  return total;
}

}  // namespace rhyme::trace
