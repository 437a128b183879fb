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

#include "rhyme/sim/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "rhyme/util/error.hpp"

namespace rhyme::sim {
namespace {

using nlohmann::ordered_json;

ordered_json counters_json(const spec::SpecCounters& c) {
  ordered_json j;
  j["tokens_total"] = c.tokens_total;
  j["tokens_speculated"] = c.tokens_speculated;
  j["tokens_accepted"] = c.tokens_accepted;
  j["verify_passes"] = c.verify_passes;
  j["decode_passes"] = c.decode_passes;
  return j;
}

spec::SpecCounters counters_from(const nlohmann::json& j) {
  spec::SpecCounters c;
  c.tokens_total = j.at("tokens_total").get<std::int64_t>();
  c.tokens_speculated = j.at("tokens_speculated").get<std::int64_t>();
  c.tokens_accepted = j.at("tokens_accepted").get<std::int64_t>();
  c.verify_passes = j.at("verify_passes").get<std::int64_t>();
  c.decode_passes = j.at("decode_passes").get<std::int64_t>();
  return c;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string run_json(const MetricsReport& m, bool pretty) {
  ordered_json j;
  j["schema"] = kRunSchema;
  j["policy"] = m.policy;
  j["seed"] = m.seed;
  j["steps"] = m.steps;
  j["samples"] = m.samples;
  j["makespan"] = m.makespan;
  j["samples_per_second"] = m.samples_per_second;
  j["bubble_fraction"] = m.bubble_fraction;
  j["worker_bubble"] = m.worker_bubble;
  j["stage_shares"] = {{"rollout", m.rollout_share}, {"reward", m.reward_share}, {"train", m.train_share}};
  j["migration_pct"] = m.migration_pct;
  j["speculation_rate"] = m.speculation_rate;
  j["acceptance_rate"] = m.acceptance_rate;
  j["earliest_idle_fraction"] = m.earliest_idle_fraction;
  j["wall_per_10_steps"] = m.wall_per_10_steps;
  j["conservation_ok"] = m.conservation_ok;
  auto& steps = j["per_step"] = ordered_json::array();
  for (const auto& s : m.per_step) {
    ordered_json r;
    r["step"] = s.step;
    r["epoch"] = s.epoch;
    r["histopipe"] = s.histopipe;
    r["rollout_start"] = s.rollout_start;
    r["rollout_end"] = s.rollout_end;
    r["train_done"] = s.train_done;
    r["samples"] = s.samples;
    r["migrated_intra"] = s.migrated_intra;
    r["migrated_inter"] = s.migrated_inter;
    r["earliest_idle_fraction"] = s.earliest_idle_fraction;
    r["group_workers"] = s.group_workers;
    r["spec"] = counters_json(s.spec);
    steps.push_back(std::move(r));
  }
  return pretty ? j.dump(2) : j.dump();
}

MetricsReport parse_run_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema").get<std::string>() != kRunSchema) {
      throw InputError("not a " + std::string(kRunSchema) + " document");
    }
    MetricsReport m;
    m.policy = j.at("policy").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.steps = j.at("steps").get<std::int64_t>();
    m.samples = j.at("samples").get<std::int64_t>();
    m.makespan = j.at("makespan").get<double>();
    m.samples_per_second = j.at("samples_per_second").get<double>();
    m.bubble_fraction = j.at("bubble_fraction").get<double>();
    m.worker_bubble = j.at("worker_bubble").get<std::vector<double>>();
    m.rollout_share = j.at("stage_shares").at("rollout").get<double>();
    m.reward_share = j.at("stage_shares").at("reward").get<double>();
    m.train_share = j.at("stage_shares").at("train").get<double>();
    m.migration_pct = j.at("migration_pct").get<double>();
    m.speculation_rate = j.at("speculation_rate").get<double>();
    m.acceptance_rate = j.at("acceptance_rate").get<double>();
    m.earliest_idle_fraction = j.at("earliest_idle_fraction").get<double>();
    m.wall_per_10_steps = j.at("wall_per_10_steps").get<double>();
    m.conservation_ok = j.at("conservation_ok").get<bool>();
    for (const auto& r : j.at("per_step")) {
      StepMetrics s;
      s.step = r.at("step").get<std::int64_t>();
      s.epoch = r.at("epoch").get<std::int64_t>();
      s.histopipe = r.at("histopipe").get<bool>();
      s.rollout_start = r.at("rollout_start").get<double>();
      s.rollout_end = r.at("rollout_end").get<double>();
      s.train_done = r.at("train_done").get<double>();
      s.samples = r.at("samples").get<std::int64_t>();
      s.migrated_intra = r.at("migrated_intra").get<std::int64_t>();
      s.migrated_inter = r.at("migrated_inter").get<std::int64_t>();
      s.earliest_idle_fraction = r.at("earliest_idle_fraction").get<double>();
      s.group_workers = r.at("group_workers").get<std::vector<int>>();
      s.spec = counters_from(r.at("spec"));
      m.per_step.push_back(std::move(s));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("run file: ") + e.what());
  }
}

std::string comparison_csv(const std::vector<MetricsReport>& runs) {
  std::ostringstream out;
  out << "policy,seed,steps,samples,makespan,samples_per_second,normalized_throughput,"
         "bubble_fraction,rollout_share,reward_share,train_share,migration_pct,"
         "speculation_rate,acceptance_rate\n";
  const double base = runs.empty() ? 0.0 : runs.front().samples_per_second;
  for (const auto& r : runs) {
    out << r.policy << ',' << r.seed << ',' << r.steps << ',' << r.samples << ',' << fmt(r.makespan)
        << ',' << fmt(r.samples_per_second) << ','
        << fmt(base > 0 ? r.samples_per_second / base : 0.0) << ',' << fmt(r.bubble_fraction) << ','
        << fmt(r.rollout_share) << ',' << fmt(r.reward_share) << ',' << fmt(r.train_share) << ','
        << fmt(r.migration_pct) << ',' << fmt(r.speculation_rate) << ','
        << fmt(r.acceptance_rate) << '\n';
  }
  return out.str();
}

std::string comparison_json(const std::vector<MetricsReport>& runs, bool pretty) {
  ordered_json j;
  j["schema"] = kReportSchema;
  auto& rows = j["runs"] = ordered_json::array();
  const double base = runs.empty() ? 0.0 : runs.front().samples_per_second;
  for (const auto& r : runs) {
    ordered_json row;
    row["policy"] = r.policy;
    row["seed"] = r.seed;
    row["samples_per_second"] = r.samples_per_second;
    row["normalized_throughput"] = base > 0 ? r.samples_per_second / base : 0.0;
    row["bubble_fraction"] = r.bubble_fraction;
    row["stage_shares"] = {{"rollout", r.rollout_share}, {"reward", r.reward_share}, {"train", r.train_share}};
    row["migration_pct"] = r.migration_pct;
    row["speculation_rate"] = r.speculation_rate;
    row["acceptance_rate"] = r.acceptance_rate;
    rows.push_back(std::move(row));
  }
  return pretty ? j.dump(2) : j.dump();
}

std::string comparison_table(const std::vector<MetricsReport>& runs) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %10s %8s %8s %8s %8s %8s\n", "policy", "samples/s", "norm",
                "bubble", "rollout", "migr%", "spec");
  out << line;
  const double base = runs.empty() ? 0.0 : runs.front().samples_per_second;
  for (const auto& r : runs) {
    std::snprintf(line, sizeof(line), "%-20s %10.3f %8.3f %8.3f %8.3f %8.2f %8.3f\n", r.policy.c_str(),
                  r.samples_per_second, base > 0 ? r.samples_per_second / base : 0.0,
                  r.bubble_fraction, r.rollout_share, r.migration_pct, r.speculation_rate);
    out << line;
  }
  return out.str();
}

std::string timeline_csv(const std::vector<TimelineRow>& rows) {
  std::ostringstream out;
  out << "worker_id,start,end,activity\n";
  for (const auto& r : rows) {
    out << r.worker << ',' << fmt(r.start) << ',' << fmt(r.end) << ',' << r.activity << '\n';
  }
  return out.str();
}

std::string spec_stats_csv(const MetricsReport& m) {
  std::string out = spec::stats_csv_header() + "\n";
  for (const auto& s : m.per_step) out += spec::stats_csv_row(s.step, s.spec) + "\n";
  return out;
}

}  // namespace rhyme::sim
