// Copyright 2026 The VRC Eval Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Submission server: token-authenticated uploads, rolling-window rate limit,
// asynchronous scoring against server-held truth and a persistent
// leaderboard.
//
//   POST /v1/submissions              -> 202 {id, status}
//   GET  /v1/leaderboard?task=<task>  -> ranked entries
//   GET  /v1/submissions/<id>         -> status, scores and full report
//
// Persistence lives in data_dir: `log.jsonl` (append-only event log),
// `snapshot.json` (state as of some log line) and `payloads/<id>.txt`.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vrc/hierarchy.hpp"
#include "vrc/ingest.hpp"
#include "vrc/report.hpp"

namespace httplib {
class Server;
}

namespace vrc {

// Milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "vrc-data";
  std::size_t max_payload_bytes = std::size_t{256} << 20;
  int submissions_per_window = 2;
  std::int64_t window_ms = std::int64_t{7} * 24 * 3600 * 1000;
  std::size_t snapshot_every = 50;  // completed evaluations between snapshots
  unsigned eval_workers_per_task = 1;
  unsigned eval_threads = 1;  // threads inside one detection evaluation
  std::map<Task, std::filesystem::path> truth_dirs;
  std::optional<std::filesystem::path> hierarchy_edges;
  std::optional<std::filesystem::path> hierarchy_leaves;
  std::filesystem::path tokens_file;
  Clock clock = system_clock_ms;
};

// Reads the JSON config file. The VRC_TOKENS_FILE environment variable, when
// set, overrides "tokensFile". Relative paths resolve against the config
// file's directory.
ServiceConfig load_service_config(const std::filesystem::path& path);

// `team<TAB>token` per line; blank lines and '#' comments are skipped.
// Returns token -> team. Throws kParse on malformed lines or reused tokens.
std::map<std::string, std::string> parse_tokens(std::string_view bytes);

std::string sha256_hex(std::string_view bytes);

// Accepted submissions per key within a rolling window. An event exactly
// `window_ms` old has left the window.
class RateLimiter {
 public:
  RateLimiter(int limit, std::int64_t window_ms) : limit_(limit), window_ms_(window_ms) {}

  bool allow(const std::string& key, std::int64_t now) const;
  void record(const std::string& key, std::int64_t now);
  int in_window(const std::string& key, std::int64_t now) const;

 private:
  int limit_;
  std::int64_t window_ms_;
  std::map<std::string, std::vector<std::int64_t>> events_;
};

enum class SubmissionStatus { kQueued, kRunning, kCompleted, kFailed };
std::string_view status_name(SubmissionStatus s);

struct LeaderboardEntry {
  std::string id;
  std::string team;
  Task task = Task::kClassification;
  std::int64_t submitted_at = 0;
  std::string digest;          // unique per entry: sha256 over id and payload
  std::string content_sha256;  // sha256 of the payload alone
  std::size_t bytes = 0;
  SubmissionStatus status = SubmissionStatus::kQueued;
  Json scores;  // headline summary once completed
  Json report;  // full evaluation report once completed
  std::string error;
};

// Single-writer, append-only persistence. Callers serialize access.
class LeaderboardStore {
 public:
  // Loads snapshot.json and replays log lines written after it.
  explicit LeaderboardStore(std::filesystem::path dir, std::size_t snapshot_every = 50);

  void append_submitted(const LeaderboardEntry& entry, std::string_view payload);
  void append_running(const std::string& id);
  void append_completed(const std::string& id, const Json& scores, const Json& report);
  void append_failed(const std::string& id, const std::string& error);
  void snapshot();

  const std::map<std::string, LeaderboardEntry>& entries() const noexcept { return entries_; }
  std::string payload(const std::string& id) const;
  std::uint64_t next_sequence() const noexcept { return sequence_ + 1; }

 private:
  void apply(const Json& event);
  void write_event(const Json& event);

  std::filesystem::path dir_;
  std::size_t snapshot_every_;
  std::size_t completions_since_snapshot_ = 0;
  std::uint64_t log_lines_ = 0;
  std::uint64_t sequence_ = 0;
  std::map<std::string, LeaderboardEntry> entries_;
};

struct ServiceResponse {
  int status = 200;
  Json body;
};

class SubmissionService {
 public:
  SubmissionService(ServiceConfig config, std::map<Task, GroundTruthStore> truth,
                    std::optional<SynsetGraph> hierarchy, std::map<std::string, std::string> tokens);
  // Loads truth, hierarchy and tokens named by the config.
  static std::unique_ptr<SubmissionService> from_config(const ServiceConfig& config);
  ~SubmissionService();

  SubmissionService(const SubmissionService&) = delete;
  SubmissionService& operator=(const SubmissionService&) = delete;

  // Transport-independent handlers.
  ServiceResponse submit(const std::string& token, const std::string& task,
                         const std::string& payload);
  ServiceResponse leaderboard(const std::string& task) const;
  ServiceResponse submission(const std::string& id) const;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();
  // Blocks until every queued evaluation has finished.
  void wait_idle();

 private:
  struct Queue {
    std::deque<std::string> ids;
    std::vector<std::thread> workers;
    std::size_t running = 0;
  };

  void worker_loop(Task task);
  void evaluate(const std::string& id);
  Json ranked_entries(Task task) const;

  ServiceConfig config_;
  std::map<Task, GroundTruthStore> truth_;
  std::optional<SynsetGraph> hierarchy_;
  std::map<std::string, std::string> tokens_;

  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  bool stopping_ = false;
  LeaderboardStore store_;
  RateLimiter limiter_;
  std::map<Task, Queue> queues_;

  std::unique_ptr<httplib::Server> http_;
  std::thread http_thread_;
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool stopped_ = false;
};

}  // namespace vrc
