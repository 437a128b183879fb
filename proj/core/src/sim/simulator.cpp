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

#include "rhyme/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

#include <json.hpp>

#include "rhyme/history/history_store.hpp"
#include "rhyme/pipe/allocation.hpp"
#include "rhyme/pipe/cost_model.hpp"
#include "rhyme/pipe/grouping.hpp"
#include "rhyme/pipe/migration.hpp"
#include "rhyme/trace/analysis.hpp"
#include "rhyme/util/error.hpp"

namespace rhyme::sim {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::rollout_finish:
      return "rollout_finish";
    case EventKind::migration:
      return "migration";
    case EventKind::weight_update:
      return "weight_update";
    case EventKind::reward_done:
      return "reward_done";
    case EventKind::train_done:
      return "train_done";
    case EventKind::step_boundary:
      return "step_boundary";
  }
  return "unknown";
}

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

enum class Ev { tick, reward_done, minibatch_done, train_done, wake_all };

struct Pending {
  double time;
  std::uint64_t seq;
  Ev kind;
  int who;
  std::int64_t arg;
};

struct Later {
  bool operator()(const Pending& a, const Pending& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

struct Sample {
  std::size_t response = 0;
  std::string id;
  std::string prompt;
  std::int64_t epoch = 0;
  std::int64_t length = 0;
  std::int64_t origin_step = 0;
  std::int64_t train_step = 0;
  std::int64_t finish_step = 0;
  int finishes = 0;
  bool migrated = false;
};

struct Seq {
  std::size_t sample = 0;
  std::int64_t generated = 0;
  std::int64_t pending = 0;
  int group = -1;  // ranking group of origin while not migrated
  bool migrated = false;
  std::shared_ptr<const history::SuffixTree> tree;
  std::unique_ptr<spec::ResponseState> state;
};

struct Group {
  double max_hist = 0.0;
  std::int64_t size = 0;
  std::int64_t remaining = 0;
  std::vector<int> workers;
};

struct Step {
  std::int64_t epoch = 0;
  std::vector<std::size_t> samples;
  bool planned = false;
  bool histo = false;
  double beta = 1.1;
  std::vector<std::vector<std::size_t>> per_worker;
  std::vector<std::vector<Seq>> carry_in;
  std::vector<double> carry_debt;
  std::vector<int> worker_group;
  std::vector<Group> groups;
  std::int64_t outstanding = 0;
  std::int64_t batch = 0;
  std::int64_t rewarded = 0;
  std::int64_t queued_for_train = 0;
  double train_compute = 0.0;
  double switch_time = 0.0;
  bool closed = false;
  double train_done = kNever;
  std::vector<double> worker_start;
  std::vector<double> worker_finish;
  StepMetrics metrics;
};

struct Span {
  double start;
  double end;
  std::string activity;
};

void add_span(std::vector<Span>& spans, double start, double end, const char* activity) {
  if (end <= start) return;
  if (!spans.empty() && spans.back().end == start && spans.back().activity == activity) {
    spans.back().end = end;
    return;
  }
  spans.push_back({start, end, activity});
}

double union_length(std::vector<std::pair<double, double>> iv) {
  std::sort(iv.begin(), iv.end());
  double total = 0.0, cur_s = 0.0, cur_e = -kNever;
  for (const auto& [s, e] : iv) {
    if (s > cur_e) {
      if (cur_e > cur_s) total += cur_e - cur_s;
      cur_s = s;
      cur_e = e;
    } else {
      cur_e = std::max(cur_e, e);
    }
  }
  if (cur_e > cur_s) total += cur_e - cur_s;
  return total;
}

struct Worker {
  std::string name;
  std::int64_t done_step = 0;
  std::int64_t cur_step = 0;
  std::vector<Seq> active;
  std::deque<Seq> queued;
  std::vector<Seq> incoming;
  double debt = 0.0;
  std::int64_t version = -1;
  spec::SpecCounters recent;
  std::vector<Span> spans;
};

class Engine {
 public:
  Engine(const trace::Trace& trace, const SimConfig& cfg)
      : trace_(trace),
        cfg_(cfg),
        policy_(cfg.sim.policy),
        n_workers_(cfg.cluster.rollout_workers),
        store_([](history::HistoryStore::Task t) { t(); }) {
    cfg_.validate();
    if (trace_.size() == 0) throw InputError("simulation needs a non-empty trace");
    if (is_histopipe(policy_) && trace_.epochs().size() < 2) {
      throw InputError("histopipe policies need a trace with at least two epochs");
    }
    if (cfg_.sim.speculation && !trace_.has_tokens()) {
      throw InputError("speculation needs a trace with tokens");
    }
    if (is_histopipe(policy_) && !cfg_.cost.profile.empty()) {
      profile_ = pipe::ProfileCost::load_csv(cfg_.cost.profile);
    }
    build_steps();
    workers_ = std::vector<Worker>(static_cast<std::size_t>(n_workers_));
    for (int w = 0; w < n_workers_; ++w) workers_[w].name = "rollout-" + std::to_string(w);
    reward_free_.assign(static_cast<std::size_t>(cfg_.cluster.reward_workers), true);
    reward_spans_.resize(reward_free_.size());
  }

  SimResult run() {
    for (int w = 0; w < n_workers_; ++w) try_start(w, 0.0);
    while (!queue_.empty()) {
      const auto ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case Ev::tick:
          on_tick(ev.who);
          break;
        case Ev::reward_done:
          on_reward_done(ev.who, static_cast<std::size_t>(ev.arg));
          break;
        case Ev::minibatch_done:
          train_busy_ = false;
          try_train();
          break;
        case Ev::train_done:
          on_train_done(ev.arg);
          break;
        case Ev::wake_all:
          for (int w = 0; w < n_workers_; ++w) try_start(w, now_);
          break;
      }
    }
    if (next_train_ <= last_step()) {
      throw Error("simulation stalled before step " + std::to_string(next_train_) + " trained");
    }
    return finish();
  }

 private:
  [[nodiscard]] std::int64_t last_step() const { return static_cast<std::int64_t>(steps_.size()) - 1; }

  void push(double t, Ev kind, int who, std::int64_t arg = 0) {
    queue_.push({t, next_seq_++, kind, who, arg});
  }

  void log(EventKind kind, std::int64_t step, std::string sample, std::string worker,
           std::int64_t version, bool migrated, std::string detail = {}) {
    events_.push_back({now_, kind, step, std::move(sample), std::move(worker), version, migrated,
                       std::move(detail)});
  }

  // ---- setup -------------------------------------------------------------

  void build_steps() {
    const auto pps = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(cfg_.cluster.prompts_per_step *
                                               (1.0 + cfg_.sim.oversample_pct / 100.0) - 1e-9)));
    steps_.emplace_back();  // steps are 1-based
    for (const auto e : trace_.epochs()) {
      auto prompts = trace_.prompts_in(e);
      std::seed_seq seq{static_cast<std::uint32_t>(cfg_.sim.seed),
                        static_cast<std::uint32_t>(cfg_.sim.seed >> 32), static_cast<std::uint32_t>(e)};
      std::mt19937_64 rng(seq);
      for (std::size_t i = prompts.size(); i > 1; --i) {
        std::swap(prompts[i - 1], prompts[static_cast<std::size_t>(rng() % i)]);
      }
      for (std::size_t begin = 0; begin < prompts.size(); begin += static_cast<std::size_t>(pps)) {
        if (cfg_.sim.steps > 0 && last_step() >= cfg_.sim.steps) return;
        Step st;
        st.epoch = e;
        const auto k = last_step() + 1;
        const auto end = std::min(prompts.size(), begin + static_cast<std::size_t>(pps));
        for (std::size_t p = begin; p < end; ++p) {
          const auto group = trace_.group(e, prompts[p]);
          for (std::size_t slot = 0; slot < group.size(); ++slot) {
            const auto& r = trace_.responses()[group[slot]];
            Sample s;
            s.response = group[slot];
            s.id = r.prompt_id + "/" + std::to_string(e) + "/" + std::to_string(slot);
            s.prompt = r.prompt_id;
            s.epoch = e;
            s.length = r.length;
            s.origin_step = s.train_step = k;
            st.samples.push_back(samples_.size());
            samples_.push_back(std::move(s));
          }
          prompt_left_[{prompts[p], e}] = static_cast<std::int64_t>(group.size());
        }
        st.outstanding = st.batch = static_cast<std::int64_t>(st.samples.size());
        st.worker_start.assign(static_cast<std::size_t>(cfg_.cluster.rollout_workers), kNever);
        st.worker_finish.assign(static_cast<std::size_t>(cfg_.cluster.rollout_workers), kNever);
        st.carry_in.resize(static_cast<std::size_t>(cfg_.cluster.rollout_workers));
        st.carry_debt.assign(static_cast<std::size_t>(cfg_.cluster.rollout_workers), 0.0);
        st.metrics.step = k;
        st.metrics.epoch = e;
        steps_.push_back(std::move(st));
      }
    }
  }

  // Prompt -> (median, max) of its responses in `epoch`.
  [[nodiscard]] std::optional<pipe::PromptHistory> history_of(const std::string& prompt,
                                                              std::int64_t epoch) const {
    std::vector<double> lens;
    for (const auto i : trace_.group(epoch, prompt)) {
      lens.push_back(static_cast<double>(trace_.responses()[i].length));
    }
    if (lens.empty()) return std::nullopt;
    const double mx = *std::max_element(lens.begin(), lens.end());
    return pipe::PromptHistory{prompt, pipe::median(std::move(lens)), mx};
  }

  void ensure_plan(std::int64_t k) {
    auto& st = steps_[static_cast<std::size_t>(k)];
    if (st.planned) return;
    st.planned = true;
    const auto nw = static_cast<std::size_t>(n_workers_);
    st.per_worker.assign(nw, {});
    st.worker_group.assign(nw, -1);

    std::vector<std::string> prompts;
    for (const auto s : st.samples) {
      if (prompts.empty() || prompts.back() != samples_[s].prompt) prompts.push_back(samples_[s].prompt);
    }
    std::vector<pipe::PromptHistory> hist;
    const int n = cfg_.cluster.n_groups;
    if (is_histopipe(policy_) && trace_.has_epoch(st.epoch - 1) &&
        prompts.size() >= static_cast<std::size_t>(n)) {
      for (const auto& p : prompts) {
        auto h = history_of(p, st.epoch - 1);
        if (!h) break;
        hist.push_back(std::move(*h));
      }
      st.histo = hist.size() == prompts.size();
    }
    st.metrics.histopipe = st.histo;

    if (!st.histo) {
      // Contiguous equal chunks of the prompt-major sample list.
      const auto sizes = pipe::split_sizes(st.samples.size(), n_workers_);
      std::size_t pos = 0;
      for (std::size_t w = 0; w < nw; ++w) {
        for (std::size_t j = 0; j < sizes[w]; ++j) st.per_worker[w].push_back(st.samples[pos++]);
      }
      return;
    }

    std::map<std::string, double, std::less<>> predicted;
    for (const auto& h : hist) predicted[h.prompt_id] = h.median_len;
    auto groups = pipe::build_groups(hist, n);
    if (trace_.has_epoch(st.epoch - 2)) {
      st.beta = pipe::beta_from_history(trace::median_growth(trace_, st.epoch - 2, st.epoch - 1));
    }

    std::vector<int> workers;
    if (policy_ == Policy::histopipe_naive) {
      for (const auto s : pipe::split_sizes(nw, n)) workers.push_back(static_cast<int>(s));
    } else {
      workers = two_tier_workers(k, groups);
    }

    const auto order = pipe::assignment_order(k, n);
    st.groups.resize(static_cast<std::size_t>(n));
    int next = 0;
    for (const int g : order) {
      for (int j = 0; j < workers[static_cast<std::size_t>(g)]; ++j) {
        st.worker_group[static_cast<std::size_t>(next)] = g;
        st.groups[static_cast<std::size_t>(g)].workers.push_back(next);
        ++next;
      }
    }
    std::map<std::string, int, std::less<>> group_of;
    for (const auto& g : groups) {
      st.groups[static_cast<std::size_t>(g.index)].max_hist = g.max_hist_len;
      for (const auto& p : g.prompt_ids) group_of[p] = g.index;
      st.metrics.group_workers.push_back(workers[static_cast<std::size_t>(g.index)]);
    }
    // Longest-predicted-first onto the least-loaded worker of the group.
    for (std::size_t g = 0; g < st.groups.size(); ++g) {
      auto& grp = st.groups[g];
      std::vector<std::size_t> members;
      for (const auto s : st.samples) {
        if (group_of.at(samples_[s].prompt) == static_cast<int>(g)) members.push_back(s);
      }
      std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return predicted.at(samples_[a].prompt) > predicted.at(samples_[b].prompt);
      });
      std::vector<double> load(grp.workers.size(), 0.0);
      for (const auto s : members) {
        const auto best = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
        load[best] += predicted.at(samples_[s].prompt);
        st.per_worker[static_cast<std::size_t>(grp.workers[best])].push_back(s);
      }
      grp.size = grp.remaining = static_cast<std::int64_t>(members.size());
    }
  }

  std::vector<int> two_tier_workers(std::int64_t k, const std::vector<pipe::RankingGroup>& groups) {
    const int n = cfg_.cluster.n_groups;
    std::vector<double> lens;
    std::int64_t batch = 1;
    const auto group_size = static_cast<std::int64_t>(
        steps_[static_cast<std::size_t>(k)].samples.size() / std::max<std::size_t>(1, groups.size()));
    for (const auto& g : groups) {
      lens.push_back(g.representative_len);
      batch = std::max(batch, group_size + 1);
    }
    const double acc = spec_total_.passes() > 0
                           ? static_cast<double>(spec_total_.tokens_accepted) /
                                 static_cast<double>(spec_total_.passes())
                           : 0.0;
    pipe::AnalyticCost analytic({cfg_.cost.iter_fixed, cfg_.cost.iter_per_seq, 0.0,
                                 cfg_.cost.plan_tail, batch, acc});
    const pipe::CostModel& model = profile_ ? static_cast<const pipe::CostModel&>(*profile_)
                                            : static_cast<const pipe::CostModel&>(analytic);
    const double t_train =
        last_train_compute_ > 0.0
            ? last_train_compute_
            : cfg_.cost.train(static_cast<std::int64_t>(steps_[static_cast<std::size_t>(k)].samples.size()));
    const pipe::WorkerBounds bounds{cfg_.cluster.min_wks, cfg_.cluster.effective_max_wks()};
    // t0 pins the shortest group to max_wks workers, so a loose upper bound
    // can starve the rest. Tighten it until a plan fits.
    pipe::AllocationPlan plan;
    for (int cap = bounds.max_wks; cap >= bounds.min_wks && !plan.feasible; --cap) {
      plan = pipe::plan_allocation(lens, n_workers_, t_train, model, {bounds.min_wks, cap},
                                   cfg_.sim.plan_precision);
    }
    if (!plan.feasible) {
      std::string lens_text;
      for (const double l : lens) lens_text += (lens_text.empty() ? "" : ",") + std::to_string(l);
      throw InfeasibleError("no feasible worker allocation for step " + std::to_string(k) + " (lens " +
                            lens_text + ", t_train " + std::to_string(t_train) +
                            "): " + pipe::to_json(plan));
    }
    auto workers = plan.per_group_workers;
    int spare = n_workers_;
    for (const int w : workers) spare -= w;
    // Spare workers go to the longest groups.
    for (int g = n - 1; spare > 0; g = g == 0 ? n - 1 : g - 1) {
      if (workers[static_cast<std::size_t>(g)] < bounds.max_wks) {
        ++workers[static_cast<std::size_t>(g)];
        --spare;
      } else if (std::all_of(workers.begin(), workers.end(),
                             [&](int w) { return w >= bounds.max_wks; })) {
        break;
      }
    }
    return workers;
  }

  // ---- weights -------------------------------------------------------------

  [[nodiscard]] std::int64_t version_for(std::int64_t k) const {
    return policy_ == Policy::colocated ? k : k - 1;
  }

  [[nodiscard]] double version_ready(std::int64_t k) const {
    const auto needed = policy_ == Policy::colocated ? k - 1 : k - 2;
    if (needed <= 0) return 0.0;
    const auto& st = steps_[static_cast<std::size_t>(needed)];
    if (st.train_done == kNever) return kNever;
    return st.train_done +
           (policy_ == Policy::colocated ? st.switch_time : cfg_.cluster.weight_propagation_delay);
  }

  // ---- rollout workers -----------------------------------------------------

  void try_start(int w, double t) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    if (wk.cur_step != 0) return;
    const auto k = wk.done_step + 1;
    if (k > last_step()) return;
    ensure_plan(k);
    const auto& st = steps_[static_cast<std::size_t>(k)];
    if (!st.histo && k > 1) {
      for (const auto& other : workers_) {
        if (other.done_step < k - 1) return;
      }
    }
    if (version_ready(k) > t) return;  // a wake-up follows train_done
    start_step(w, k, t);
  }

  Seq make_seq(std::size_t sid, int group) {
    Seq q;
    q.sample = sid;
    q.group = group;
    if (cfg_.sim.speculation) {
      const auto& s = samples_[sid];
      const auto visible = store_.visible_epoch(s.prompt);
      if (visible && *visible < s.epoch) q.tree = store_.snapshot(s.prompt);
      q.state = std::make_unique<spec::ResponseState>(trace_.responses()[s.response].tokens,
                                                      cfg_.sim.spec);
    }
    return q;
  }

  void admit(Worker& wk) {
    for (auto& q : wk.incoming) wk.queued.push_back(std::move(q));
    wk.incoming.clear();
    while (!wk.queued.empty() && wk.active.size() < static_cast<std::size_t>(cfg_.cluster.max_batch)) {
      wk.active.push_back(std::move(wk.queued.front()));
      wk.queued.pop_front();
    }
  }

  void start_step(int w, std::int64_t k, double t) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    auto& st = steps_[static_cast<std::size_t>(k)];
    wk.cur_step = k;
    wk.recent = {};
    const auto version = version_for(k);
    if (wk.version != version) {
      wk.version = version;
      log(EventKind::weight_update, k, {}, wk.name, version, false);
    }
    const auto ws = static_cast<std::size_t>(w);
    for (const auto sid : st.per_worker[ws]) wk.queued.push_back(make_seq(sid, st.worker_group[ws]));
    for (auto& q : st.carry_in[ws]) wk.queued.push_back(std::move(q));
    st.carry_in[ws].clear();
    wk.debt += st.carry_debt[ws];
    st.carry_debt[ws] = 0.0;
    admit(wk);
    if (wk.active.empty()) {
      worker_step_done(w, t);
      return;
    }
    st.worker_start[ws] = t;
    schedule_chunk(w, t);
  }

  void schedule_chunk(int w, double t) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    auto& st = steps_[static_cast<std::size_t>(wk.cur_step)];
    const auto batch = static_cast<std::int64_t>(wk.active.size());
    double duration = 0.0;
    if (cfg_.sim.speculation) {
      std::int64_t drafted = 0;
      spec::StepContext ctx;
      ctx.gate = &cfg_.sim.spec.gate;
      ctx.batch = batch;
      ctx.enabled = cfg_.sim.spec.enabled;
      ctx.recent_acceptance = wk.recent.tokens_speculated > 0 ? wk.recent.acceptance_rate() : 1.0;
      for (auto& q : wk.active) {
        ctx.tree = q.tree.get();
        const auto before = q.state->counters;
        const auto out = spec::step_response(*q.state, ctx);
        q.pending = static_cast<std::int64_t>(out.appended);
        drafted += static_cast<std::int64_t>(out.drafted);
        auto delta = q.state->counters;
        delta.tokens_total -= before.tokens_total;
        delta.tokens_speculated -= before.tokens_speculated;
        delta.tokens_accepted -= before.tokens_accepted;
        delta.verify_passes -= before.verify_passes;
        delta.decode_passes -= before.decode_passes;
        wk.recent += delta;
        st.metrics.spec += delta;
        spec_total_ += delta;
      }
      duration = cfg_.cost.iteration(batch, drafted);
    } else {
      std::int64_t iters = cfg_.sim.max_chunk;
      for (const auto& q : wk.active) {
        iters = std::min(iters, samples_[q.sample].length - q.generated);
        if (migration_on(st) && q.group >= 0) {
          const auto& g = st.groups[static_cast<std::size_t>(q.group)];
          const double threshold = st.beta * g.max_hist;
          if (pipe::in_tail(g.remaining, g.size, cfg_.sim.alpha) &&
              static_cast<double>(q.generated) <= threshold) {
            const auto need = static_cast<std::int64_t>(std::floor(threshold)) - q.generated + 1;
            iters = std::min(iters, std::max<std::int64_t>(1, need));
          }
        }
      }
      iters = std::max<std::int64_t>(1, iters);
      for (auto& q : wk.active) q.pending = iters;
      duration = static_cast<double>(iters) * cfg_.cost.iteration(batch);
    }
    double start = t;
    if (wk.debt > 0.0) {
      add_span(wk.spans, start, start + wk.debt, "prefill");
      start += wk.debt;
      wk.debt = 0.0;
    }
    add_span(wk.spans, start, start + duration, "rollout");
    push(start + duration, Ev::tick, w);
  }

  [[nodiscard]] bool migration_on(const Step& st) const {
    return st.histo && cfg_.sim.migration && !st.groups.empty();
  }

  void on_tick(int w) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    auto& st = steps_[static_cast<std::size_t>(wk.cur_step)];
    std::vector<Seq> still;
    still.reserve(wk.active.size());
    for (auto& q : wk.active) {
      q.generated += q.pending;
      q.pending = 0;
      if (q.generated >= samples_[q.sample].length) {
        finish_sample(w, q);
      } else {
        still.push_back(std::move(q));
      }
    }
    wk.active = std::move(still);
    if (migration_on(st)) check_migrations(w);
    admit(wk);
    if (wk.active.empty()) {
      worker_step_done(w, now_);
    } else {
      schedule_chunk(w, now_);
    }
  }

  void finish_sample(int w, Seq& q) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    auto& s = samples_[q.sample];
    auto& st = steps_[static_cast<std::size_t>(wk.cur_step)];
    ++s.finishes;
    s.finish_step = wk.cur_step;
    if (q.group >= 0) --st.groups[static_cast<std::size_t>(q.group)].remaining;
    --steps_[static_cast<std::size_t>(s.train_step)].outstanding;
    log(EventKind::rollout_finish, s.train_step, s.id, wk.name, wk.version, s.migrated);

    auto& left = prompt_left_[{s.prompt, s.epoch}];
    if (--left == 0 && cfg_.sim.speculation) {
      std::vector<Response> group;
      for (const auto i : trace_.group(s.epoch, s.prompt)) group.push_back(trace_.responses()[i]);
      try {
        store_.ingest_epoch(s.prompt, s.epoch, std::move(group));
      } catch (const StaleEpochError&) {
        // A later epoch of this prompt completed first; keep the newer tree.
      }
    }
    reward_queue_.push_back(q.sample);
    dispatch_rewards();
  }

  void check_migrations(int w) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    const auto k = wk.cur_step;
    auto& st = steps_[static_cast<std::size_t>(k)];
    const int n = cfg_.cluster.n_groups;
    pipe::MigrationPolicy policy;
    policy.alpha = cfg_.sim.alpha;
    policy.beta = st.beta;

    std::vector<Seq> keep;
    for (auto& q : wk.active) {
      if (q.migrated || q.group < 0) {
        keep.push_back(std::move(q));
        continue;
      }
      auto& g = st.groups[static_cast<std::size_t>(q.group)];
      if (!pipe::in_tail(g.remaining, g.size, policy.alpha) ||
          !(static_cast<double>(q.generated) > policy.beta * g.max_hist)) {
        keep.push_back(std::move(q));
        continue;
      }
      std::vector<pipe::GroupLoad> loads;
      for (int h = 0; h < n; ++h) {
        pipe::GroupLoad gl{h, 0.0, false};
        int serving = 0;
        std::size_t inflight = 0;
        for (const int v : st.groups[static_cast<std::size_t>(h)].workers) {
          const auto& other = workers_[static_cast<std::size_t>(v)];
          if (other.cur_step != k || other.active.empty() || v == w) continue;
          ++serving;
          inflight += other.active.size() + other.queued.size() + other.incoming.size();
        }
        gl.active = serving > 0 && st.groups[static_cast<std::size_t>(h)].remaining > 0;
        gl.load = serving > 0 ? static_cast<double>(inflight) / serving : 0.0;
        loads.push_back(gl);
      }
      const pipe::GroupState gs{q.group, n, g.size, g.remaining, g.max_hist};
      const auto d = pipe::migration_decision(gs, static_cast<double>(q.generated), loads, policy,
                                              k < last_step());
      if (d.kind == pipe::MigrationKind::none) {
        keep.push_back(std::move(q));
        continue;
      }
      --g.remaining;
      q.group = -1;
      q.migrated = true;
      auto& s = samples_[q.sample];
      s.migrated = true;
      const double prefill = cfg_.cost.prefill(q.generated);
      if (d.kind == pipe::MigrationKind::intra_step) {
        int target = -1;
        std::size_t best = 0;
        for (const int v : st.groups[static_cast<std::size_t>(d.target_group)].workers) {
          const auto& other = workers_[static_cast<std::size_t>(v)];
          if (other.cur_step != k || other.active.empty() || v == w) continue;
          const auto load = other.active.size() + other.queued.size() + other.incoming.size();
          if (target < 0 || load < best) {
            target = v;
            best = load;
          }
        }
        auto& dst = workers_[static_cast<std::size_t>(target)];
        ++st.metrics.migrated_intra;
        log(EventKind::migration, k, s.id, wk.name, wk.version, true,
            "intra_step:" + dst.name);
        dst.debt += prefill;
        dst.incoming.push_back(std::move(q));
      } else {
        ++st.metrics.migrated_inter;
        const auto next = k + 1;
        ensure_plan(next);
        auto& nst = steps_[static_cast<std::size_t>(next)];
        s.train_step = next;
        --st.outstanding;
        --st.batch;
        ++nst.outstanding;
        ++nst.batch;
        const int target = carry_target(next);
        auto& dst = workers_[static_cast<std::size_t>(target)];
        log(EventKind::migration, k, s.id, wk.name, wk.version, true,
            "inter_step:" + dst.name);
        if (dst.cur_step == next) {
          dst.debt += prefill;
          dst.incoming.push_back(std::move(q));
        } else {
          nst.carry_debt[static_cast<std::size_t>(target)] += prefill;
          nst.carry_in[static_cast<std::size_t>(target)].push_back(std::move(q));
        }
      }
    }
    wk.active = std::move(keep);
  }

  // Worker of the next step's shortest group with the least work, falling
  // back to any worker that has not finished that step yet.
  int carry_target(std::int64_t k) {
    const auto& st = steps_[static_cast<std::size_t>(k)];
    const auto load_of = [&](int v) {
      const auto& wk = workers_[static_cast<std::size_t>(v)];
      const auto vs = static_cast<std::size_t>(v);
      if (wk.cur_step == k) return wk.active.size() + wk.queued.size() + wk.incoming.size();
      return st.per_worker[vs].size() + st.carry_in[vs].size();
    };
    const auto pick = [&](const std::vector<int>& cands) {
      int best = -1;
      std::size_t best_load = 0;
      for (const int v : cands) {
        if (workers_[static_cast<std::size_t>(v)].done_step >= k) continue;
        const auto l = load_of(v);
        if (best < 0 || l < best_load) {
          best = v;
          best_load = l;
        }
      }
      return best;
    };
    std::vector<int> all(static_cast<std::size_t>(n_workers_));
    for (int v = 0; v < n_workers_; ++v) all[static_cast<std::size_t>(v)] = v;
    int target = st.histo ? pick(st.groups.front().workers) : -1;
    if (target < 0) target = pick(all);
    if (target < 0) throw Error("no worker left to continue a deferred rollout");
    return target;
  }

  void worker_step_done(int w, double t) {
    auto& wk = workers_[static_cast<std::size_t>(w)];
    const auto k = wk.cur_step;
    steps_[static_cast<std::size_t>(k)].worker_finish[static_cast<std::size_t>(w)] = t;
    wk.done_step = k;
    wk.cur_step = 0;
    check_close(k);
    bool all_done = true;
    for (const auto& other : workers_) all_done = all_done && other.done_step >= k;
    if (all_done) {
      for (int v = 0; v < n_workers_; ++v) try_start(v, t);
    } else {
      try_start(w, t);
    }
  }

  void check_close(std::int64_t k) {
    if (k > last_step()) return;
    auto& st = steps_[static_cast<std::size_t>(k)];
    if (st.closed || st.outstanding != 0) return;
    if (k > 1 && !steps_[static_cast<std::size_t>(k - 1)].closed) return;
    for (const auto& wk : workers_) {
      if (wk.done_step < k) return;
    }
    st.closed = true;
    st.metrics.rollout_end = now_;
    log(EventKind::step_boundary, k, {}, {}, version_for(k), false,
        "samples:" + std::to_string(st.batch));
    try_train();
    check_close(k + 1);
  }

  // ---- reward and train ----------------------------------------------------

  void dispatch_rewards() {
    for (std::size_t r = 0; r < reward_free_.size() && !reward_queue_.empty(); ++r) {
      if (!reward_free_[r]) continue;
      const auto sid = reward_queue_.front();
      reward_queue_.pop_front();
      reward_free_[r] = false;
      add_span(reward_spans_[r], now_, now_ + cfg_.cost.reward_per_sample, "reward");
      push(now_ + cfg_.cost.reward_per_sample, Ev::reward_done, static_cast<int>(r),
           static_cast<std::int64_t>(sid));
    }
  }

  void on_reward_done(int r, std::size_t sid) {
    reward_free_[static_cast<std::size_t>(r)] = true;
    const auto& s = samples_[sid];
    log(EventKind::reward_done, s.train_step, s.id, "reward-" + std::to_string(r), -1, s.migrated);
    auto& st = steps_[static_cast<std::size_t>(s.train_step)];
    ++st.rewarded;
    ++st.queued_for_train;
    dispatch_rewards();
    try_train();
  }

  void try_train() {
    if (train_busy_ || next_train_ > last_step()) return;
    const auto j = next_train_;
    auto& st = steps_[static_cast<std::size_t>(j)];
    const bool all_in = st.closed && st.rewarded == st.batch;
    if (policy_ == Policy::colocated) {
      if (!all_in) return;
      const double train = cfg_.cost.train(st.batch);
      st.switch_time = cfg_.cost.context_switch_frac * train;
      st.train_compute = train;
      st.queued_for_train = 0;
      const double begin = now_ + st.switch_time;
      for (auto& wk : workers_) {
        add_span(wk.spans, now_, begin, "switch");
        add_span(wk.spans, begin, begin + train, "train");
      }
      add_span(train_spans_, begin, begin + train, "train");
      train_busy_ = true;
      push(begin + train, Ev::train_done, -1, j);
      return;
    }
    if (all_in && st.queued_for_train == 0) {
      train_busy_ = true;
      st.train_compute += cfg_.cost.train_fixed;
      add_span(train_spans_, now_, now_ + cfg_.cost.train_fixed, "train");
      push(now_ + cfg_.cost.train_fixed, Ev::train_done, -1, j);
    } else if (st.queued_for_train >= cfg_.sim.minibatch || (all_in && st.queued_for_train > 0)) {
      const auto n = std::min<std::int64_t>(st.queued_for_train, cfg_.sim.minibatch);
      st.queued_for_train -= n;
      const double d = cfg_.cost.train_per_sample * static_cast<double>(n);
      st.train_compute += d;
      train_busy_ = true;
      add_span(train_spans_, now_, now_ + d, "train");
      push(now_ + d, Ev::minibatch_done, -1);
    }
  }

  void on_train_done(std::int64_t j) {
    train_busy_ = false;
    auto& st = steps_[static_cast<std::size_t>(j)];
    st.train_done = now_;
    st.metrics.train_done = now_;
    st.metrics.samples = st.batch;
    last_train_compute_ = st.train_compute;
    log(EventKind::train_done, j, {}, "train-0", j + 1, false, "samples:" + std::to_string(st.batch));
    ++next_train_;
    double ready = now_ + cfg_.cluster.weight_propagation_delay;
    if (policy_ == Policy::colocated) {
      ready = now_ + st.switch_time;
      if (j < last_step()) {
        for (auto& wk : workers_) add_span(wk.spans, now_, ready, "switch");
      }
    }
    push(ready, Ev::wake_all, -1);
    try_train();
  }

  // ---- results -------------------------------------------------------------

  SimResult finish() {
    SimResult out;
    auto& m = out.metrics;
    m.policy = std::string(to_string(policy_));
    m.seed = cfg_.sim.seed;
    m.steps = last_step();
    m.makespan = steps_.back().train_done;
    std::int64_t migrated = 0;
    for (const auto& s : samples_) {
      migrated += s.migrated ? 1 : 0;
      if (s.finishes != 1 || (s.finish_step != s.origin_step && s.finish_step != s.origin_step + 1)) {
        m.conservation_ok = false;
      }
    }
    for (std::size_t k = 1; k < steps_.size(); ++k) m.samples += steps_[k].batch;
    if (m.samples != static_cast<std::int64_t>(samples_.size())) m.conservation_ok = false;
    m.samples_per_second = m.makespan > 0 ? static_cast<double>(m.samples) / m.makespan : 0.0;
    m.migration_pct = samples_.empty() ? 0.0 : 100.0 * static_cast<double>(migrated) /
                                                   static_cast<double>(samples_.size());

    std::vector<std::pair<double, double>> rollout_iv, reward_iv, train_iv;
    double bubble_sum = 0.0;
    for (const auto& wk : workers_) {
      double busy = 0.0;
      for (const auto& sp : wk.spans) {
        busy += sp.end - sp.start;
        if (sp.activity == "rollout" || sp.activity == "prefill") rollout_iv.emplace_back(sp.start, sp.end);
        out.timeline.push_back({wk.name, sp.start, sp.end, sp.activity});
      }
      const double bubble = m.makespan > 0 ? std::clamp(1.0 - busy / m.makespan, 0.0, 1.0) : 0.0;
      m.worker_bubble.push_back(bubble);
      bubble_sum += bubble;
    }
    m.bubble_fraction = workers_.empty() ? 0.0 : bubble_sum / static_cast<double>(workers_.size());
    for (std::size_t r = 0; r < reward_spans_.size(); ++r) {
      for (const auto& sp : reward_spans_[r]) {
        reward_iv.emplace_back(sp.start, sp.end);
        out.timeline.push_back({"reward-" + std::to_string(r), sp.start, sp.end, sp.activity});
      }
    }
    for (const auto& sp : train_spans_) {
      train_iv.emplace_back(sp.start, sp.end);
      out.timeline.push_back({"train-0", sp.start, sp.end, sp.activity});
    }
    const double ro = union_length(std::move(rollout_iv));
    const double re = union_length(std::move(reward_iv));
    const double tr = union_length(std::move(train_iv));
    const double total = ro + re + tr;
    if (total > 0) {
      m.rollout_share = ro / total;
      m.reward_share = re / total;
      m.train_share = tr / total;
    }
    m.speculation_rate = spec_total_.speculation_rate();
    m.acceptance_rate = spec_total_.acceptance_rate();

    double idle_sum = 0.0;
    int idle_steps = 0;
    for (std::size_t k = 1; k < steps_.size(); ++k) {
      auto& st = steps_[k];
      double first_start = kNever, first_finish = kNever, last_finish = -kNever;
      for (std::size_t w = 0; w < st.worker_start.size(); ++w) {
        if (st.worker_start[w] == kNever) continue;
        first_start = std::min(first_start, st.worker_start[w]);
        first_finish = std::min(first_finish, st.worker_finish[w]);
        last_finish = std::max(last_finish, st.worker_finish[w]);
      }
      st.metrics.rollout_start = first_start == kNever ? 0.0 : first_start;
      if (last_finish > first_start) {
        st.metrics.earliest_idle_fraction = (last_finish - first_finish) / (last_finish - first_start);
        idle_sum += st.metrics.earliest_idle_fraction;
        ++idle_steps;
      }
      m.per_step.push_back(st.metrics);
    }
    m.earliest_idle_fraction = idle_steps > 0 ? idle_sum / idle_steps : 0.0;
    m.wall_per_10_steps = m.steps > 0 ? m.makespan / static_cast<double>(m.steps) * 10.0 : 0.0;
    std::stable_sort(out.timeline.begin(), out.timeline.end(), [](const auto& a, const auto& b) {
      return a.worker != b.worker ? a.worker < b.worker : a.start < b.start;
    });
    out.events = std::move(events_);
    return out;
  }

  const trace::Trace& trace_;
  SimConfig cfg_;
  Policy policy_;
  int n_workers_;
  history::HistoryStore store_;
  std::optional<pipe::ProfileCost> profile_;

  std::vector<Sample> samples_;
  std::vector<Step> steps_;
  std::map<std::pair<std::string, std::int64_t>, std::int64_t> prompt_left_;
  std::vector<Worker> workers_;

  std::deque<std::size_t> reward_queue_;
  std::vector<bool> reward_free_;
  std::vector<std::vector<Span>> reward_spans_;
  std::vector<Span> train_spans_;
  bool train_busy_ = false;
  std::int64_t next_train_ = 1;
  double last_train_compute_ = 0.0;

  spec::SpecCounters spec_total_;
  std::vector<SimEvent> events_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

}  // namespace

SimResult run(const trace::Trace& trace, const SimConfig& config) {
  Engine engine(trace, config);
  return engine.run();
}

void write_events_jsonl(const std::vector<SimEvent>& events, std::ostream& out) {
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["time"] = e.time;
    j["kind"] = to_string(e.kind);
    j["step"] = e.step;
    j["sample"] = e.sample;
    j["worker"] = e.worker;
    j["weight_version"] = e.weight_version;
    j["migrated"] = e.migrated;
    j["detail"] = e.detail;
    out << j.dump() << '\n';
  }
}

std::string events_jsonl(const std::vector<SimEvent>& events) {
  std::ostringstream out;
  write_events_jsonl(events, out);
  return out.str();
}

}  // namespace rhyme::sim
