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

#include "rhyme/history/history_store.hpp"

#include <cmath>

#include <json.hpp>

#include "rhyme/util/error.hpp"

namespace rhyme::history {

HistoryStore::HistoryStore(std::size_t worker_threads) {
  if (worker_threads == 0) worker_threads = 1;
  executor_ = [this](Task task) {
    {
      std::lock_guard lock(queue_mu_);
      queue_.push_back(std::move(task));
    }
    queue_cv_.notify_one();
  };
  workers_.reserve(worker_threads);
  for (std::size_t i = 0; i < worker_threads; ++i) {
    workers_.emplace_back([this](std::stop_token stop) { worker_loop(stop); });
  }
}

HistoryStore::HistoryStore(Executor executor) : executor_(std::move(executor)) {}

HistoryStore::~HistoryStore() {
  for (auto& w : workers_) w.request_stop();
  queue_cv_.notify_all();
  workers_.clear();
}

void HistoryStore::worker_loop(std::stop_token stop) {
  while (true) {
    Task task;
    {
      std::unique_lock lock(queue_mu_);
      if (!queue_cv_.wait(lock, stop, [this] { return !queue_.empty(); })) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

void HistoryStore::ingest_epoch(const std::string& prompt_id, std::int64_t epoch,
                                std::vector<Response> responses) {
  for (const auto& r : responses) {
    if (!std::isfinite(r.reward)) throw InputError("non-finite reward for prompt " + prompt_id);
    if (r.prompt_id != prompt_id) {
      throw InputError("response for prompt " + r.prompt_id + " ingested under " + prompt_id);
    }
  }
  {
    std::unique_lock lock(mu_);
    const auto it = latest_requested_.find(prompt_id);
    if (it != latest_requested_.end() && epoch <= it->second) {
      throw StaleEpochError("prompt " + prompt_id + ": epoch " + std::to_string(epoch) +
                            " is not newer than " + std::to_string(it->second));
    }
    latest_requested_.insert_or_assign(prompt_id, epoch);
  }
  {
    std::lock_guard lock(pending_mu_);
    ++pending_;
  }
  executor_([this, prompt_id, epoch, responses = std::move(responses)]() {
    std::shared_ptr<const SuffixTree> tree;
    try {
      tree = std::make_shared<const SuffixTree>(SuffixTree::build(prompt_id, epoch, responses));
    } catch (const Error&) {
      // A rejected corpus leaves the previous tree visible.
    }
    if (tree) publish(prompt_id, std::move(tree));
    {
      std::lock_guard lock(pending_mu_);
      --pending_;
    }
    pending_cv_.notify_all();
  });
}

void HistoryStore::publish(const std::string& prompt_id, std::shared_ptr<const SuffixTree> tree) {
  std::unique_lock lock(mu_);
  auto& slot = trees_[prompt_id];
  // Builds for consecutive epochs may finish out of order.
  if (!slot || slot->epoch() < tree->epoch()) slot = std::move(tree);
}

std::shared_ptr<const SuffixTree> HistoryStore::snapshot(std::string_view prompt_id) const {
  std::shared_lock lock(mu_);
  const auto it = trees_.find(prompt_id);
  return it == trees_.end() ? nullptr : it->second;
}

std::optional<std::int64_t> HistoryStore::visible_epoch(std::string_view prompt_id) const {
  auto tree = snapshot(prompt_id);
  if (!tree) return std::nullopt;
  return tree->epoch();
}

void HistoryStore::wait_idle() {
  std::unique_lock lock(pending_mu_);
  pending_cv_.wait(lock, [this] { return pending_ == 0; });
}

MemoryStats HistoryStore::memory_stats() const {
  std::shared_lock lock(mu_);
  MemoryStats stats;
  stats.prompts = trees_.size();
  for (const auto& [id, tree] : trees_) {
    const auto s = tree->stats();
    stats.total_nodes += s.nodes;
    stats.total_tokens += s.tokens;
    stats.approx_bytes += s.approx_bytes;
  }
  return stats;
}

std::string HistoryStore::stats_json() const {
  nlohmann::json prompts = nlohmann::json::array();
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, tree] : trees_) {
      const auto s = tree->stats();
      prompts.push_back({{"prompt_id", id},
                         {"epoch", tree->epoch()},
                         {"responses", s.responses},
                         {"tokens", s.tokens},
                         {"nodes", s.nodes},
                         {"root_priority", tree->root_priority()},
                         {"approx_bytes", s.approx_bytes}});
    }
  }
  const auto total = memory_stats();
  nlohmann::json out = {{"schema", "rhyme.tree_stats/1"},
                        {"prompts", total.prompts},
                        {"total_nodes", total.total_nodes},
                        {"total_tokens", total.total_tokens},
                        {"approx_bytes", total.approx_bytes},
                        {"trees", prompts}};
  return out.dump(2);
}

}  // namespace rhyme::history
