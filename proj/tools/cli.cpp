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

#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rhyme/pipe/allocation.hpp"
#include "rhyme/pipe/cost_model.hpp"
#include "rhyme/sim/report.hpp"
#include "rhyme/sim/simulator.hpp"
#include "rhyme/spec/engine.hpp"
#include "rhyme/trace/analysis.hpp"
#include "rhyme/trace/generator.hpp"
#include "rhyme/util/config.hpp"
#include "rhyme/util/error.hpp"
#include "rhyme/util/io.hpp"

namespace rhyme::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

Config load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : Config::load(path);
  cfg.apply_overrides(overrides);
  return cfg;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

// Parsed options shared between the CLI11 callbacks and the handlers.
struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string trace;
  std::string format = "csv";
  std::string bench_format = "json";
  bool pretty = false;

  std::string spec_file;
  int groups = 8;
  std::int64_t epoch = 0;
  int prefix = 3;
  std::vector<std::int64_t> epochs;
  bool engine = false;
  std::int64_t batch = 1;

  std::vector<double> lens;
  int wks = 0;
  double t_train = 0.0;
  int min_wks = 1;
  int max_wks = 0;
  double precision = 1.0;
  std::string model = "ratio";
  std::string profile;
  std::int64_t plan_batch = 1;
  double plan_tail = 1.0;

  std::string cluster;
  std::string policy;
  std::string events;
  std::string timeline;
  std::string spec_stats;
  int replicas = 1;
  std::vector<std::string> runs;
  std::string csv;
  std::string json;
};

int cmd_gen_trace(const Options& o, std::ostream& out) {
  const auto cfg = load_config(o.spec_file, o.overrides);
  const auto trace = trace::generate(trace::TraceSpec::from_config(cfg));
  emit(o.out, trace::to_jsonl(trace), out);
  return kOk;
}

int cmd_analyze_rank(const Options& o, std::ostream& out) {
  const auto trace = trace::load_jsonl(o.trace);
  std::vector<trace::RankMetrics> rows;
  if (o.epoch > 0) {
    rows.push_back(trace::rank_metrics(trace, o.epoch, o.groups));
  } else {
    rows = trace::rank_metrics_all(trace, o.groups);
  }
  if (rows.empty()) throw InputError("trace needs at least two consecutive epochs");
  std::string text;
  if (o.format == "json") {
    ordered_json j;
    j["schema"] = "rhyme.rank/1";
    j["groups"] = o.groups;
    auto& arr = j["epochs"] = ordered_json::array();
    for (const auto& r : rows) {
      ordered_json e;
      e["epoch"] = r.epoch == 0 ? ordered_json("mean") : ordered_json(r.epoch);
      e["responses"] = r.responses;
      e["beta"] = r.beta;
      e["accurate_pct"] = r.accurate_pct;
      e["not_last_10_pct"] = r.not_last_10_pct;
      e["within_1p1x_pct"] = r.within_1p1x_pct;
      e["migrated_pct"] = r.migrated_pct;
      arr.push_back(std::move(e));
    }
    text = (o.pretty ? j.dump(2) : j.dump()) + "\n";
  } else {
    text = "epoch,responses,beta,accurate_pct,not_last_10_pct,within_1p1x_pct,migrated_pct\n";
    for (const auto& r : rows) {
      text += (r.epoch == 0 ? std::string("mean") : std::to_string(r.epoch)) + "," +
              std::to_string(r.responses) + "," + fmt(r.beta) + "," + fmt(r.accurate_pct) + "," +
              fmt(r.not_last_10_pct) + "," + fmt(r.within_1p1x_pct) + "," + fmt(r.migrated_pct) + "\n";
    }
  }
  emit(o.out, text, out);
  return kOk;
}

std::vector<std::int64_t> replay_epochs(const trace::Trace& trace, std::vector<std::int64_t> wanted) {
  if (!wanted.empty()) return wanted;
  for (const auto e : trace.epochs()) {
    if (trace.has_epoch(e - 1)) wanted.push_back(e);
  }
  if (wanted.empty()) throw InputError("trace needs at least two consecutive epochs");
  return wanted;
}

int cmd_analyze_similarity(const Options& o, std::ostream& out) {
  const auto trace = trace::load_jsonl(o.trace);
  std::vector<std::int64_t> wanted;
  if (o.epoch > 0) wanted.push_back(o.epoch);
  std::vector<trace::ReplayResult> rows;
  for (const auto e : replay_epochs(trace, wanted)) {
    rows.push_back(trace::token_similarity_replay(trace, e, o.prefix));
  }
  std::string text;
  if (o.format == "json") {
    ordered_json j;
    j["schema"] = "rhyme.similarity/1";
    j["prefix"] = o.prefix;
    auto& arr = j["epochs"] = ordered_json::array();
    for (const auto& r : rows) {
      arr.push_back({{"epoch", r.epoch},
                     {"accepted", r.accepted},
                     {"total", r.total},
                     {"warmup", r.warmup},
                     {"acceptance", r.fraction()},
                     {"acceptance_after_warmup", r.fraction_after_warmup()}});
    }
    text = (o.pretty ? j.dump(2) : j.dump()) + "\n";
  } else {
    text = "epoch,accepted,total,warmup,acceptance,acceptance_after_warmup\n";
    for (const auto& r : rows) {
      text += std::to_string(r.epoch) + "," + std::to_string(r.accepted) + "," +
              std::to_string(r.total) + "," + std::to_string(r.warmup) + "," + fmt(r.fraction()) +
              "," + fmt(r.fraction_after_warmup()) + "\n";
    }
  }
  emit(o.out, text, out);
  return kOk;
}

int cmd_bench_spec(const Options& o, std::ostream& out) {
  const auto trace = trace::load_jsonl(o.trace);
  const auto cfg = load_config(o.config, o.overrides);
  const auto spec_cfg = spec::SpecConfig::from_config(cfg);
  ordered_json j;
  j["schema"] = "rhyme.bench_spec/1";
  j["prefix"] = o.prefix;
  auto& arr = j["epochs"] = ordered_json::array();
  std::string csv = spec::stats_csv_header() + "\n";
  for (const auto e : replay_epochs(trace, o.epochs)) {
    const auto r = trace::token_similarity_replay(trace, e, o.prefix);
    ordered_json row;
    row["epoch"] = e;
    row["acceptance"] = r.fraction();
    row["acceptance_after_warmup"] = r.fraction_after_warmup();
    if (o.engine) {
      const auto c = trace::engine_replay(trace, e, spec_cfg, o.batch);
      row["engine"] = {{"speculation_rate", c.speculation_rate()},
                       {"acceptance_rate", c.acceptance_rate()},
                       {"verify_passes", c.verify_passes},
                       {"decode_passes", c.decode_passes},
                       {"tokens_total", c.tokens_total}};
      csv += spec::stats_csv_row(e, c) + "\n";
    }
    arr.push_back(std::move(row));
  }
  if (o.bench_format == "csv" && o.engine) {
    emit(o.out, csv, out);
  } else {
    emit(o.out, (o.pretty ? j.dump(2) : j.dump()) + "\n", out);
  }
  return kOk;
}

int cmd_plan_alloc(const Options& o, std::ostream& out) {
  if (o.lens.size() < 2) throw ConfigError("--lens needs at least two lengths");
  std::unique_ptr<pipe::CostModel> model;
  if (!o.profile.empty()) {
    model = std::make_unique<pipe::ProfileCost>(pipe::ProfileCost::load_csv(o.profile));
  } else if (o.model == "ratio") {
    model = std::make_unique<pipe::FunctionCost>([](double l, int k) { return l / k; });
  } else if (o.model == "analytic") {
    const auto cfg = load_config(o.config, o.overrides);
    pipe::AnalyticCostParams p;
    p.per_pass = cfg.get_double("cost.iter_fixed");
    p.per_seq = cfg.get_double("cost.iter_per_seq");
    p.tail = cfg.get_double("cost.plan_tail");
    p.batch = o.plan_batch;
    model = std::make_unique<pipe::AnalyticCost>(p);
  } else {
    throw ConfigError("--model must be ratio or analytic");
  }
  const pipe::WorkerBounds bounds{o.min_wks, o.max_wks > 0 ? o.max_wks : o.wks - (static_cast<int>(o.lens.size()) - 1)};
  const auto plan = pipe::plan_allocation(o.lens, o.wks, o.t_train, *model, bounds, o.precision);
  std::string text;
  if (o.pretty) {
    text = nlohmann::json::parse(pipe::to_json(plan)).dump(2) + "\n";
  } else {
    text = pipe::to_json(plan) + "\n";
  }
  emit(o.out, text, out);
  return plan.feasible ? kOk : kInfeasible;
}

fs::path replica_path(const std::string& path, int i) {
  fs::path p(path);
  return p.parent_path() / (p.stem().string() + "." + std::to_string(i) + p.extension().string());
}

int cmd_run_sim(const Options& o, std::ostream& out) {
  auto cfg = load_config(o.cluster, {});
  if (!o.config.empty()) {
    const auto extra = Config::load(o.config);
    for (const auto& [k, v] : extra.values()) cfg.set(k, v);
  }
  if (!o.policy.empty()) cfg.set("sim.policy", o.policy);
  cfg.apply_overrides(o.overrides);
  const auto base = sim::SimConfig::from_config(cfg);
  const auto trace = trace::load_jsonl(o.trace);
  if (o.replicas < 1) throw ConfigError("--replicas must be >= 1");

  std::vector<std::future<sim::SimResult>> jobs;
  for (int i = 0; i < o.replicas; ++i) {
    auto c = base;
    c.sim.seed = base.sim.seed + static_cast<std::uint64_t>(i);
    jobs.push_back(std::async(o.replicas > 1 ? std::launch::async : std::launch::deferred,
                              [&trace, c] { return sim::run(trace, c); }));
  }
  std::vector<sim::SimResult> results;
  for (auto& j : jobs) results.push_back(j.get());

  const auto target = [&](const std::string& path, int i) {
    return o.replicas == 1 ? fs::path(path) : replica_path(path, i);
  };
  for (int i = 0; i < o.replicas; ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    const auto json = sim::run_json(r.metrics, o.pretty) + "\n";
    if (o.out.empty()) {
      out << json;
    } else {
      write_file_atomic(target(o.out, i), json);
    }
    if (!o.events.empty()) write_file_atomic(target(o.events, i), sim::events_jsonl(r.events));
    if (!o.timeline.empty()) write_file_atomic(target(o.timeline, i), sim::timeline_csv(r.timeline));
    if (!o.spec_stats.empty()) write_file_atomic(target(o.spec_stats, i), sim::spec_stats_csv(r.metrics));
  }
  if (!o.out.empty() && o.pretty) {
    std::vector<sim::MetricsReport> ms;
    for (const auto& r : results) ms.push_back(r.metrics);
    out << sim::comparison_table(ms);
  }
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  std::vector<sim::MetricsReport> runs;
  for (const auto& path : o.runs) runs.push_back(sim::parse_run_json(read_file(path)));
  if (runs.empty()) throw ConfigError("report needs at least one --runs file");
  if (!o.csv.empty()) write_file_atomic(o.csv, sim::comparison_csv(runs));
  if (!o.json.empty()) write_file_atomic(o.json, sim::comparison_json(runs, o.pretty) + "\n");
  if (!o.timeline.empty()) throw ConfigError("--timeline is produced by run-sim");
  if (o.pretty) {
    out << sim::comparison_table(runs);
  } else if (o.csv.empty() && o.json.empty()) {
    out << sim::comparison_csv(runs);
  }
  return kOk;
}

void add_config_opts(CLI::App* app, Options& o, const char* what) {
  app->add_option("--config", o.config, what)->check(CLI::ExistingFile);
  app->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
}

int error_exit(std::ostream& err, const char* kind, int code, const std::string& message) {
  ordered_json j;
  j["error"] = kind;
  j["exit_code"] = code;
  j["message"] = message;
  err << j.dump() << '\n';
  return code;
}

}  // namespace

std::string version_text() {
  return "rhyme 0.1.0\n"
         "trace: rhyme.trace/1 (JSONL)\n"
         "config: rhyme.config/1 (key = value)\n"
         "profile: rhyme.profile/1 (CSV len,dp,seconds)\n"
         "plan: rhyme.plan/1 (JSON)\n"
         "run: " + std::string(sim::kRunSchema) + " (JSON)\n"
         "events: " + std::string(sim::kEventSchema) + " (JSONL)\n"
         "report: " + std::string(sim::kReportSchema) + " (CSV/JSON)\n"
         "timeline: rhyme.timeline/1 (CSV worker_id,start,end,activity)\n"
         "spec_stats: rhyme.spec_stats/1 (CSV)\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rhyme: rollout trace generation, analysis, planning and pipeline simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_text());
  app.footer(config_help());
  Options o;

  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic multi-epoch trace");
  gen->add_option("--spec", o.spec_file, "config file with trace.* keys")->check(CLI::ExistingFile);
  gen->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
  gen->add_option("--out", o.out, "output JSONL (default stdout)");

  auto* analyze = app.add_subcommand("analyze", "trace metrics");
  analyze->require_subcommand(1);
  auto* rank = analyze->add_subcommand("rank", "rank-prediction accuracy and migration rate");
  rank->add_option("--trace", o.trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  rank->add_option("--groups", o.groups, "ranking groups")->check(CLI::Range(2, 1 << 20));
  rank->add_option("--epoch", o.epoch, "single epoch (default: every epoch with a predecessor)");
  rank->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  rank->add_option("--out", o.out, "output file (default stdout)");
  rank->add_flag("--pretty", o.pretty, "indent JSON");
  auto* sim_an = analyze->add_subcommand("similarity", "token acceptance of a history replay");
  sim_an->add_option("--trace", o.trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  sim_an->add_option("--prefix", o.prefix, "prefix length")->check(CLI::PositiveNumber);
  sim_an->add_option("--epoch", o.epoch, "single epoch (default: every epoch with a predecessor)");
  sim_an->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  sim_an->add_option("--out", o.out, "output file (default stdout)");
  sim_an->add_flag("--pretty", o.pretty, "indent JSON");

  auto* bench = app.add_subcommand("bench-spec", "replay acceptance and speculation engine statistics");
  bench->add_option("--trace", o.trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  bench->add_option("--epochs", o.epochs, "epochs to replay against their predecessor");
  bench->add_option("--prefix", o.prefix, "replay prefix length")->check(CLI::PositiveNumber);
  bench->add_flag("--engine", o.engine, "also run the speculation engine (spec.* keys)");
  bench->add_option("--batch", o.batch, "batch size seen by the gate")->check(CLI::PositiveNumber);
  bench->add_option("--format", o.bench_format, "json | csv (csv: engine stats rows)")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--out", o.out, "output file (default stdout)");
  bench->add_flag("--pretty", o.pretty, "indent JSON");
  add_config_opts(bench, o, "config file with spec.* keys");

  auto* plan = app.add_subcommand("plan-alloc", "per-group worker allocation");
  plan->add_option("--lens", o.lens, "representative lengths, ascending")->required()->delimiter(',');
  plan->add_option("--wks", o.wks, "rollout workers")->required()->check(CLI::PositiveNumber);
  plan->add_option("--t-train", o.t_train, "duration of the last train stage");
  plan->add_option("--min-wks", o.min_wks, "fewest workers per group");
  plan->add_option("--max-wks", o.max_wks, "most workers per group (default wks-(N-1))");
  plan->add_option("--precision", o.precision, "bisection precision");
  plan->add_option("--model", o.model, "ratio (len/dp) | analytic (cost.* keys)")
      ->check(CLI::IsMember({"ratio", "analytic"}));
  plan->add_option("--batch", o.plan_batch, "rollouts per group for the analytic model");
  plan->add_option("--profile", o.profile, "CSV len,dp,seconds table")->check(CLI::ExistingFile);
  plan->add_option("--out", o.out, "output JSON (default stdout)");
  plan->add_flag("--pretty", o.pretty, "indent JSON");
  add_config_opts(plan, o, "config file with cost.* keys");

  auto* runsim = app.add_subcommand("run-sim", "simulate the RL pipeline on a trace");
  runsim->add_option("--trace", o.trace, "trace JSONL")->required()->check(CLI::ExistingFile);
  runsim->add_option("--cluster", o.cluster, "config file (cluster.*, cost.*, sim.*, spec.* keys)")
      ->check(CLI::ExistingFile);
  runsim->add_option("--config", o.config, "extra config file applied after --cluster")
      ->check(CLI::ExistingFile);
  runsim->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
  runsim->add_option("--policy", o.policy, "colocated | streaming | histopipe_naive | histopipe_two_tier");
  runsim->add_option("--out", o.out, "run summary JSON (default stdout)");
  runsim->add_option("--events", o.events, "event log JSONL");
  runsim->add_option("--timeline", o.timeline, "timeline CSV");
  runsim->add_option("--spec-stats", o.spec_stats, "per-step speculation CSV");
  runsim->add_option("--replicas", o.replicas, "independent runs with seeds seed..seed+k-1, in parallel");
  runsim->add_flag("--pretty", o.pretty, "indent JSON and print a summary table");

  auto* report = app.add_subcommand("report", "compare runs");
  report->add_option("--runs", o.runs, "run summary files")->required()->check(CLI::ExistingFile);
  report->add_option("--csv", o.csv, "comparison CSV");
  report->add_option("--json", o.json, "comparison JSON");
  report->add_flag("--pretty", o.pretty, "print a table");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    out << version_text();
    return kOk;
  } catch (const CLI::ParseError& e) {
    return error_exit(err, "usage", kBadConfig, e.what());
  }

  try {
    if (*gen) return cmd_gen_trace(o, out);
    if (*rank) return cmd_analyze_rank(o, out);
    if (*sim_an) return cmd_analyze_similarity(o, out);
    if (*bench) return cmd_bench_spec(o, out);
    if (*plan) return cmd_plan_alloc(o, out);
    if (*runsim) return cmd_run_sim(o, out);
    if (*report) return cmd_report(o, out);
  } catch (const ConfigError& e) {
    return error_exit(err, "config", kBadConfig, e.what());
  } catch (const InputError& e) {
    return error_exit(err, "input", kBadConfig, e.what());
  } catch (const InfeasibleError& e) {
    return error_exit(err, "infeasible", kInfeasible, e.what());
  } catch (const IoError& e) {
    return error_exit(err, "io", kIoError, e.what());
  } catch (const std::exception& e) {
    return error_exit(err, "internal", kFailure, e.what());
  }
  return kFailure;
}

}  // namespace rhyme::cli
