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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "rhyme/pipe/allocation.hpp"
#include "rhyme/sim/report.hpp"
#include "rhyme/trace/analysis.hpp"
#include "rhyme/trace/trace.hpp"
#include "rhyme/util/config.hpp"
#include "rhyme/util/io.hpp"
#include "support/oracles.hpp"

namespace rhyme::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rhyme_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string make_trace(std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"gen-trace", "--out", path("trace.jsonl"), "--set", "trace.num_prompts=24",
                                  "--set", "trace.group_size=4", "--set", "trace.epochs=3",
                                  "--set", "trace.len_mu=4.5"};
    for (auto& e : extra) {
      args.push_back("--set");
      args.push_back(e);
    }
    const auto r = call(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return path("trace.jsonl");
  }

  fs::path dir_;
};

TEST_F(CliTest, VersionListsSchemas) {
  const auto r = call({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("rhyme.run/1"), std::string::npos);
  EXPECT_NE(r.out.find("rhyme.events/1"), std::string::npos);
  EXPECT_NE(r.out.find("rhyme.trace/1"), std::string::npos);
}

TEST_F(CliTest, HelpEnumeratesEveryConfigKey) {
  const auto r = call({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const auto& k : config_schema()) {
    EXPECT_NE(r.out.find(k.key + " = " + k.default_value), std::string::npos) << k.key;
  }
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const auto r = call({"plan-alloc", "--frobnicate"});
  EXPECT_EQ(r.code, kBadConfig);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), "usage");
  EXPECT_EQ(call({}).code, kBadConfig);
}

TEST_F(CliTest, UnknownConfigKeyIsConfigError) {
  const auto r = call({"gen-trace", "--set", "trace.nope=1"});
  EXPECT_EQ(r.code, kBadConfig);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "config");
}

TEST_F(CliTest, PlanAllocMatchesLibraryAndOracle) {
  const auto r = call({"plan-alloc", "--lens", "8,16,32,64", "--wks", "10", "--t-train", "0",
                       "--min-wks", "1", "--max-wks", "6", "--precision", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const pipe::FunctionCost ratio([](double l, int k) { return l / k; });
  const std::vector<double> lens{8, 16, 32, 64};
  const auto plan = pipe::plan_allocation(lens, 10, 0.0, ratio, {1, 6}, 0.01);
  EXPECT_EQ(j.at("per_group_workers").get<std::vector<int>>(), plan.per_group_workers);
  EXPECT_DOUBLE_EQ(j.at("d").get<double>(), plan.d);
  const double best = oracle::optimal_gradient(ratio, lens, 10, plan.t0, 1, 6);
  EXPECT_LE(j.at("d").get<double>(), best + 0.01 + 1e-9);
}

TEST_F(CliTest, PlanAllocInfeasibleExitsThree) {
  const auto r = call({"plan-alloc", "--lens", "1,2,4,400", "--wks", "4", "--min-wks", "1", "--max-wks", "2",
                       "--precision", "0.01"});
  EXPECT_EQ(r.code, kInfeasible) << r.out << r.err;
  EXPECT_FALSE(nlohmann::json::parse(r.out).at("feasible").get<bool>());
}

TEST_F(CliTest, PlanAllocWithProfile) {
  write_file_atomic(path("p.csv"), "len,dp,seconds\n1,1,1\n1,4,0.25\n100,1,100\n100,4,25\n");
  const auto r = call({"plan-alloc", "--lens", "10,20,40", "--wks", "8", "--profile", path("p.csv")});
  EXPECT_EQ(r.code, 0) << r.err;
  write_file_atomic(path("bad.csv"), "len,dp,seconds\n1,1,1\n1,4,2\n");
  EXPECT_EQ(call({"plan-alloc", "--lens", "10,20", "--wks", "8", "--profile", path("bad.csv")}).code,
            kBadConfig);
}

TEST_F(CliTest, BenchSpecEqualsReplay) {
  const auto t = make_trace();
  const auto r = call({"bench-spec", "--trace", t, "--epochs", "2", "--prefix", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto expect = trace::token_similarity_replay(trace::load_jsonl(t), 2, 3);
  EXPECT_DOUBLE_EQ(j.at("epochs")[0].at("acceptance").get<double>(), expect.fraction());
  const auto eng = call({"bench-spec", "--trace", t, "--engine", "--format", "csv"});
  ASSERT_EQ(eng.code, 0) << eng.err;
  EXPECT_EQ(eng.out.substr(0, 4), "step");
}

TEST_F(CliTest, TraceRoundTripsThroughAnalyze) {
  const auto t = make_trace();
  const auto loaded = trace::load_jsonl(t);
  EXPECT_EQ(loaded.size(), 24u * 4u * 3u);
  const auto r = call({"analyze", "rank", "--trace", t, "--groups", "4", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto m = trace::rank_metrics(loaded, 3, 4);
  EXPECT_DOUBLE_EQ(j.at("epochs")[1].at("accurate_pct").get<double>(), m.accurate_pct);
  const auto s = call({"analyze", "similarity", "--trace", t, "--prefix", "3", "--epoch", "2"});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("acceptance"), std::string::npos);
}

TEST_F(CliTest, MissingTraceIsReported) {
  EXPECT_EQ(call({"analyze", "rank", "--trace", path("nope.jsonl")}).code, kBadConfig);
  write_file_atomic(path("broken.jsonl"), "{not json}\n");
  const auto r = call({"analyze", "rank", "--trace", path("broken.jsonl")});
  EXPECT_EQ(r.code, kBadConfig);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "input");
}

TEST_F(CliTest, UnwritableOutputIsIoError) {
  const auto r = call({"gen-trace", "--set", "trace.num_prompts=2", "--out", path("missing/dir/t.jsonl")});
  EXPECT_EQ(r.code, kIoError) << r.err;
}

TEST_F(CliTest, RunSimAndReportRoundTrip) {
  const auto t = make_trace({"trace.with_tokens=false"});
  write_file_atomic(path("cluster.cfg"),
                    "cluster.rollout_workers = 8\ncluster.n_groups = 4\ncluster.prompts_per_step = 8\n");
  std::vector<std::string> runs;
  for (const std::string p : {"colocated", "histopipe_naive"}) {
    const auto out = path(p + ".json");
    const auto r = call({"run-sim", "--trace", t, "--cluster", path("cluster.cfg"), "--policy", p, "--out", out,
                         "--events", path(p + ".events.jsonl"), "--timeline", path(p + ".timeline.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = sim::parse_run_json(read_file(out));
    EXPECT_EQ(m.policy, p);
    EXPECT_EQ(sim::run_json(m) + "\n", read_file(out));
    runs.push_back(out);
  }
  const auto rep = call({"report", "--runs", runs[0], runs[1], "--csv", path("c.csv"), "--json", path("c.json")});
  ASSERT_EQ(rep.code, 0) << rep.err;
  const auto csv = read_file(path("c.csv"));
  EXPECT_EQ(csv.substr(0, csv.find(',')), "policy");
  EXPECT_NE(csv.find("\ncolocated,"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(read_file(path("c.json"))).at("runs").size(), 2u);
  const auto again = call({"report", "--runs", runs[0], runs[1]});
  EXPECT_EQ(again.out, csv);
}

TEST_F(CliTest, ReplicasWriteOneFilePerSeed) {
  const auto t = make_trace({"trace.with_tokens=false"});
  const auto r = call({"run-sim", "--trace", t, "--set", "cluster.rollout_workers=8", "--set",
                       "cluster.n_groups=4", "--set", "cluster.prompts_per_step=8", "--policy", "streaming",
                       "--replicas", "3", "--out", path("run.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 3; ++i) {
    const auto m = sim::parse_run_json(read_file(path("run." + std::to_string(i) + ".json")));
    EXPECT_EQ(m.seed, 1u + static_cast<unsigned>(i));
  }
}

}  // namespace
}  // namespace rhyme::cli
