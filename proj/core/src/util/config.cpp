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

#include "rhyme/util/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rhyme/util/error.hpp"

namespace rhyme {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool known_key(std::string_view key) {
  const auto& schema = config_schema();
  return std::any_of(schema.begin(), schema.end(),
                     [&](const ConfigKey& k) { return k.key == key; });
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      // synthetic trace generation
      {"trace.num_prompts", "128", "prompts in the dataset"},
      {"trace.group_size", "16", "responses sampled per prompt"},
      {"trace.epochs", "3", "epochs to generate"},
      {"trace.vocab_size", "32768", "token ids are drawn from [0, vocab_size)"},
      {"trace.len_mu", "6.0", "log-normal mu of response lengths"},
      {"trace.len_sigma", "1.0", "log-normal sigma of response lengths"},
      {"trace.len_min", "8", "lengths are clamped to at least this"},
      {"trace.len_max", "16384", "lengths are clamped to at most this"},
      {"trace.group_corr", "0.9", "share of log-length variance common to a prompt's group"},
      {"trace.similarity", "0.93", "per-token copy probability between epochs"},
      {"trace.similarity_step", "0.0", "added to similarity at every epoch (capped at 1)"},
      {"trace.burst_mean", "4", "mean length of a mutation burst"},
      {"trace.group_divergence", "0.02", "per-slot token divergence inside a group"},
      {"trace.growth_mu", "0.0", "log-normal mu of the per-epoch length growth multiplier"},
      {"trace.growth_sigma", "0.05", "log-normal sigma of the per-epoch growth multiplier"},
      {"trace.rank_noise", "0.95", "epoch-to-epoch correlation of a prompt's length rank"},
      {"trace.high_reward_frac", "0.5", "fraction of high-reward responses per group"},
      {"trace.with_tokens", "true", "emit token sequences (false: lengths only)"},
      {"trace.seed", "1", "generator seed"},
      // speculative decoding
      {"spec.enabled", "true", "allow speculation at all"},
      {"spec.window_init", "2", "initial and reset speculation window"},
      {"spec.window_add", "2", "additive window increase on full acceptance"},
      {"spec.window_max", "32", "window upper threshold"},
      {"spec.prefix_init", "7", "initial prefix length used for lookups"},
      {"spec.prefix_min", "3", "shortest prefix tried before giving up"},
      {"spec.gate_table", "0.0:8192",
       "acceptance lower bound:max batch pairs, comma separated"},
      // cluster
      {"cluster.rollout_workers", "16", "rollout workers (data-parallel inference replicas)"},
      {"cluster.reward_workers", "4", "reward workers"},
      {"cluster.n_groups", "8", "ranking groups"},
      {"cluster.prompts_per_step", "64", "prompts dispatched per step"},
      {"cluster.max_batch", "1024", "concurrent sequences per rollout worker"},
      {"cluster.weight_propagation_delay", "1.0", "seconds from train_done to weight buffers"},
      {"cluster.min_wks", "1", "fewest workers a ranking group may get"},
      {"cluster.max_wks", "0", "most workers a ranking group may get (0: wks-(N-1))"},
      // cost model
      {"cost.iter_fixed", "0.01", "seconds per forward pass, independent of batch"},
      {"cost.iter_per_seq", "0.0003", "seconds per in-flight sequence per forward pass"},
      {"cost.verify_per_token", "0.00003", "seconds per verified draft token"},
      {"cost.prefill_per_token", "0.00002", "seconds per token of KV recomputation"},
      {"cost.prompt_len", "256", "prompt tokens recomputed on migration"},
      {"cost.reward_per_sample", "0.002", "reward worker seconds per sample"},
      {"cost.train_per_sample", "0.004", "train seconds per sample"},
      {"cost.train_fixed", "0.5", "train seconds per step (optimizer, weight export)"},
      {"cost.context_switch_frac", "0.05", "colocated switch penalty as a fraction of train time"},
      {"cost.plan_tail", "2.0", "planner multiplier on the batch-independent term"},
      {"cost.profile", "", "CSV len,dp,seconds table for the planner (empty: analytic)"},
      // simulation
      {"sim.policy", "streaming", "colocated | streaming | histopipe_naive | histopipe_two_tier"},
      {"sim.seed", "1", "simulation seed (RHYME_SIM_SEED overrides)"},
      {"sim.steps", "0", "steps to simulate (0: every step the trace supports)"},
      {"sim.oversample_pct", "0", "extra prompts dispatched per step, percent"},
      {"sim.minibatch", "64", "samples per streaming train mini-batch"},
      {"sim.migration", "true", "enable intra/inter-step migration (histopipe policies)"},
      {"sim.alpha", "10", "migration window: last alpha percent of a group"},
      {"sim.speculation", "false", "drive rollouts through the speculative engine"},
      {"sim.max_chunk", "32", "iterations a worker may fast-forward between checks"},
      {"sim.plan_precision", "1.0", "binary-search precision of the allocation planner"},
  };
  return schema;
}

Config::Config() {
  for (const auto& k : config_schema()) values_.emplace(k.key, k.default_value);
}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(std::string_view key, std::string value) {
  if (!known_key(key)) throw ConfigError("unknown config key '" + std::string(key) + "'");
  values_.insert_or_assign(std::string(key), std::move(value));
}

void Config::apply_overrides(const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + a + "' is not key=value");
    set(trim(std::string_view(a).substr(0, eq)),
        std::string(trim(std::string_view(a).substr(eq + 1))));
  }
}

const std::string& Config::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

double Config::get_double(std::string_view key) const {
  const auto& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + std::string(key) + "': '" + v + "' is not a number");
}

std::int64_t Config::get_int(std::string_view key) const {
  const auto& v = get(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': '" + v + "' is not an integer");
  }
  return out;
}

bool Config::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': '" + v + "' is not a boolean");
}

std::string Config::dump() const {
  std::string out;
  for (const auto& k : config_schema()) {
    out += k.key;
    out += " = ";
    out += get(k.key);
    out += '\n';
  }
  return out;
}

std::string config_help() {
  std::string out = "Configuration keys (key = default  # description):\n";
  for (const auto& k : config_schema()) {
    out += "  " + k.key + " = " + (k.default_value.empty() ? "\"\"" : k.default_value) +
           "  # " + k.help + "\n";
  }
  return out;
}

}  // namespace rhyme
