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

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rhyme/history/suffix_tree.hpp"

namespace rhyme::history {

struct MemoryStats {
  std::size_t prompts = 0;
  std::size_t total_nodes = 0;
  std::size_t total_tokens = 0;
  std::size_t approx_bytes = 0;
};

/// Per-prompt suffix trees of the most recent epoch, built off the caller's
/// path.
///
/// ingest_epoch() queues a build and returns immediately. Until the build
/// finishes, readers keep getting the previous immutable tree (or nothing
/// on a first ingest); the finished tree is published with a single pointer
/// swap. A prompt has one writer and any number of readers.
class HistoryStore {
 public:
  using Task = std::function<void()>;
  /// Runs (or schedules) a build task. Must eventually invoke it exactly once.
  using Executor = std::function<void(Task)>;

  /// Owns `worker_threads` history workers (at least one).
  explicit HistoryStore(std::size_t worker_threads = 1);
  /// Builds on a caller-provided executor. An executor that runs the task
  /// inline makes ingestion synchronous.
  explicit HistoryStore(Executor executor);
  ~HistoryStore();

  HistoryStore(const HistoryStore&) = delete;
  HistoryStore& operator=(const HistoryStore&) = delete;

  /// Throws StaleEpochError unless `epoch` is newer than every epoch already
  /// ingested (or queued) for the prompt.
  void ingest_epoch(const std::string& prompt_id, std::int64_t epoch,
                    std::vector<Response> responses);

  /// Visible tree for a prompt; null means "no history yet".
  [[nodiscard]] std::shared_ptr<const SuffixTree> snapshot(std::string_view prompt_id) const;
  [[nodiscard]] std::optional<std::int64_t> visible_epoch(std::string_view prompt_id) const;

  /// Blocks until every queued build has been published.
  void wait_idle();

  [[nodiscard]] MemoryStats memory_stats() const;
  /// memory_stats() plus per-prompt tree statistics, as JSON.
  [[nodiscard]] std::string stats_json() const;

 private:
  void publish(const std::string& prompt_id, std::shared_ptr<const SuffixTree> tree);
  void worker_loop(std::stop_token stop);

  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const SuffixTree>, std::less<>> trees_;
  std::map<std::string, std::int64_t, std::less<>> latest_requested_;

  std::mutex pending_mu_;
  std::condition_variable pending_cv_;
  std::size_t pending_ = 0;

  Executor executor_;
  std::mutex queue_mu_;
  std::condition_variable_any queue_cv_;
  std::deque<Task> queue_;
  std::vector<std::jthread> workers_;
};

}  // namespace rhyme::history
