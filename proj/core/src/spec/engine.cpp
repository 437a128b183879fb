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

#include "rhyme/spec/engine.hpp"

#include <algorithm>
#include <cstdio>

#include "rhyme/util/config.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::spec {

SpecConfig SpecConfig::from_config(const Config& cfg) {
  SpecConfig out;
  out.enabled = cfg.get_bool("spec.enabled");
  out.window.init = static_cast<int>(cfg.get_int("spec.window_init"));
  out.window.add_step = static_cast<int>(cfg.get_int("spec.window_add"));
  out.window.max = static_cast<int>(cfg.get_int("spec.window_max"));
  out.window.size = out.window.init;
  out.prefix.initial_len = static_cast<int>(cfg.get_int("spec.prefix_init"));
  out.prefix.min_len = static_cast<int>(cfg.get_int("spec.prefix_min"));
  out.prefix.current_len = out.prefix.initial_len;
  out.gate = BatchGate::parse(cfg.get("spec.gate_table"));
  if (!out.window.valid() || out.window.add_step < 0) {
    throw ConfigError("spec.window_*: need 1 <= window_init <= window_max, window_add >= 0");
  }
  if (!out.prefix.valid()) throw ConfigError("spec.prefix_*: need 1 <= prefix_min <= prefix_init");
  return out;
}

SpecCounters& SpecCounters::operator+=(const SpecCounters& o) {
  tokens_total += o.tokens_total;
  tokens_speculated += o.tokens_speculated;
  tokens_accepted += o.tokens_accepted;
  verify_passes += o.verify_passes;
  decode_passes += o.decode_passes;
  return *this;
}

void SpecStats::add(const SpecCounters& d) {
  tokens_total_.fetch_add(d.tokens_total, std::memory_order_relaxed);
  tokens_speculated_.fetch_add(d.tokens_speculated, std::memory_order_relaxed);
  tokens_accepted_.fetch_add(d.tokens_accepted, std::memory_order_relaxed);
  verify_passes_.fetch_add(d.verify_passes, std::memory_order_relaxed);
  decode_passes_.fetch_add(d.decode_passes, std::memory_order_relaxed);
}

SpecCounters SpecStats::snapshot() const {
  SpecCounters c;
  c.tokens_total = tokens_total_.load(std::memory_order_relaxed);
  c.tokens_speculated = tokens_speculated_.load(std::memory_order_relaxed);
  c.tokens_accepted = tokens_accepted_.load(std::memory_order_relaxed);
  c.verify_passes = verify_passes_.load(std::memory_order_relaxed);
  c.decode_passes = decode_passes_.load(std::memory_order_relaxed);
  return c;
}

std::string stats_csv_header() {
  return "step,speculation_rate,acceptance_rate,verify_passes,decode_passes";
}

std::string stats_csv_row(std::int64_t step, const SpecCounters& c) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%lld,%lld", static_cast<long long>(step),
                c.speculation_rate(), c.acceptance_rate(),
                static_cast<long long>(c.verify_passes), static_cast<long long>(c.decode_passes));
  return buf;
}

ResponseState::ResponseState(std::span<const TokenId> truth, const SpecConfig& cfg)
    : window(cfg.window), prefix(cfg.prefix), truth_(truth) {
  window.size = window.init;
  prefix.current_len = prefix.initial_len;
  generated_.reserve(truth.size());
}

StepOutcome step_response(ResponseState& state, const StepContext& ctx, SpecStats* shared) {
  if (state.done()) throw CompletedResponseError("response already complete");

  StepOutcome out;
  const auto& generated = state.generated_;
  const auto truth_rest = state.truth_.subspan(generated.size());

  const bool speculate = ctx.enabled && ctx.tree != nullptr &&
                         (ctx.gate == nullptr || ctx.gate->allows(ctx.batch, ctx.recent_acceptance));
  history::DraftResult draft;
  if (speculate) {
    const auto available = static_cast<int>(generated.size());
    int last_tried = -1;
    while (true) {
      const int len = std::min(state.prefix.current_len, available);
      if (len < state.prefix.min_len) break;
      if (len != last_tried) {
        last_tried = len;
        draft = ctx.tree->draft(std::span(generated).last(static_cast<std::size_t>(len)),
                                static_cast<std::size_t>(state.window.size));
        if (draft.matched_prefix_len > 0) {
          state.prefix = choose_prefix(state.prefix, true);
          break;
        }
      }
      if (state.prefix.current_len <= state.prefix.min_len) break;
      state.prefix = choose_prefix(state.prefix, false);
    }
  }

  SpecCounters delta;
  if (!draft.tokens.empty()) {
    const auto accepted = verify(draft.tokens, truth_rest);
    state.generated_.insert(state.generated_.end(), draft.tokens.begin(),
                            draft.tokens.begin() + static_cast<std::ptrdiff_t>(accepted));
    std::size_t appended = accepted;
    if (accepted < truth_rest.size()) {
      state.generated_.push_back(truth_rest[accepted]);
      ++appended;
    }
    state.window = next_window(state.window, accepted == draft.tokens.size());
    out.drafted = draft.tokens.size();
    out.accepted = accepted;
    out.appended = appended;
    out.verified = true;
    delta.tokens_speculated = static_cast<std::int64_t>(out.drafted);
    delta.tokens_accepted = static_cast<std::int64_t>(accepted);
    delta.verify_passes = 1;
  } else {
    state.generated_.push_back(truth_rest.front());
    out.appended = 1;
    delta.decode_passes = 1;
  }
  delta.tokens_total = static_cast<std::int64_t>(out.appended);
  state.counters += delta;
  ++state.iterations;
  if (shared != nullptr) shared->add(delta);
  return out;
}

}  // namespace rhyme::spec
