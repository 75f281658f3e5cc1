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

#include "vrc/service.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include "vrc/classification.hpp"
#include "vrc/detection.hpp"
#include "vrc/localization.hpp"

namespace vrc {
namespace fs = std::filesystem;
namespace {

constexpr Task kTasks[] = {Task::kClassification, Task::kLocalization, Task::kDetection};

std::string rate_key(const std::string& team, Task task) {
  return team + '\x1f' + std::string(task_name(task));
}

Json error_body(const std::string& message, std::size_t line = 0) {
  Json j{{"error", message}};
  if (line) j["line"] = line;
  return j;
}

std::optional<Task> task_from(const std::string& name) {
  try {
    return parse_task(name);
  } catch (const Error&) {
    return std::nullopt;
  }
}

SubmissionStatus status_from(const std::string& s) {
  if (s == "queued") return SubmissionStatus::kQueued;
  if (s == "running") return SubmissionStatus::kRunning;
  if (s == "completed") return SubmissionStatus::kCompleted;
  if (s == "failed") return SubmissionStatus::kFailed;
  throw Error(ErrorCode::kParse, "unknown submission status '" + s + "'");
}

Json entry_to_json(const LeaderboardEntry& e) {
  return {{"id", e.id},
          {"team", e.team},
          {"task", task_name(e.task)},
          {"submittedAt", e.submitted_at},
          {"digest", e.digest},
          {"contentSha256", e.content_sha256},
          {"bytes", e.bytes},
          {"status", status_name(e.status)},
          {"scores", e.scores},
          {"report", e.report},
          {"error", e.error}};
}

LeaderboardEntry entry_from_json(const Json& j) {
  LeaderboardEntry e;
  e.id = j.at("id").get<std::string>();
  e.team = j.at("team").get<std::string>();
  e.task = parse_task(j.at("task").get<std::string>());
  e.submitted_at = j.at("submittedAt").get<std::int64_t>();
  e.digest = j.at("digest").get<std::string>();
  e.content_sha256 = j.at("contentSha256").get<std::string>();
  e.bytes = j.at("bytes").get<std::size_t>();
  e.status = status_from(j.at("status").get<std::string>());
  e.scores = j.value("scores", Json());
  e.report = j.value("report", Json());
  e.error = j.value("error", std::string());
  return e;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view status_name(SubmissionStatus s) {
  switch (s) {
    case SubmissionStatus::kQueued: return "queued";
    case SubmissionStatus::kRunning: return "running";
    case SubmissionStatus::kCompleted: return "completed";
    case SubmissionStatus::kFailed: return "failed";
  }
  return "unknown";
}

ServiceConfig load_service_config(const fs::path& path) {
  ServiceConfig cfg;
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "config " + path.string() + ": " + e.what());
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  try {
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.data_dir = resolve(base, j.value("dataDir", cfg.data_dir.string()));
    cfg.max_payload_bytes = j.value("maxPayloadBytes", cfg.max_payload_bytes);
    if (j.contains("rateLimit")) {
      const auto& r = j.at("rateLimit");
      cfg.submissions_per_window = r.value("submissions", cfg.submissions_per_window);
      cfg.window_ms = r.value("windowSeconds", cfg.window_ms / 1000) * 1000;
    }
    cfg.snapshot_every = j.value("snapshotEvery", cfg.snapshot_every);
    cfg.eval_workers_per_task = j.value("evalWorkersPerTask", cfg.eval_workers_per_task);
    cfg.eval_threads = j.value("evalThreads", cfg.eval_threads);
    if (j.contains("truth")) {
      for (const auto& [name, dir] : j.at("truth").items()) {
        cfg.truth_dirs[parse_task(name)] = resolve(base, dir.get<std::string>());
      }
    }
    if (j.contains("hierarchy")) {
      const auto& h = j.at("hierarchy");
      cfg.hierarchy_edges = resolve(base, h.at("edges").get<std::string>());
      if (h.contains("leaves")) cfg.hierarchy_leaves = resolve(base, h.at("leaves").get<std::string>());
    }
    if (j.contains("tokensFile")) cfg.tokens_file = resolve(base, j.at("tokensFile").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "config " + path.string() + ": " + e.what());
  }
  if (const char* env = std::getenv("VRC_TOKENS_FILE"); env && *env) cfg.tokens_file = env;
  if (cfg.tokens_file.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no tokens file (set tokensFile or VRC_TOKENS_FILE)");
  }
  if (cfg.submissions_per_window < 1 || cfg.window_ms <= 0 || cfg.eval_workers_per_task < 1) {
    throw Error(ErrorCode::kInvalidArgument, "rate limit and worker counts must be positive");
  }
  return cfg;
}

std::map<std::string, std::string> parse_tokens(std::string_view bytes) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(bytes)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorCode::kParse, "expected team<TAB>token", n);
    }
    if (!out.emplace(line.substr(tab + 1), line.substr(0, tab)).second) {
      throw Error(ErrorCode::kParse, "token reused", n);
    }
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kInternal, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

int RateLimiter::in_window(const std::string& key, std::int64_t now) const {
  auto it = events_.find(key);
  if (it == events_.end()) return 0;
  return static_cast<int>(std::count_if(it->second.begin(), it->second.end(), [&](std::int64_t t) {
    return now - t < window_ms_;
  }));
}

bool RateLimiter::allow(const std::string& key, std::int64_t now) const {
  return in_window(key, now) < limit_;
}

void RateLimiter::record(const std::string& key, std::int64_t now) { events_[key].push_back(now); }

LeaderboardStore::LeaderboardStore(fs::path dir, std::size_t snapshot_every)
    : dir_(std::move(dir)), snapshot_every_(snapshot_every) {
  fs::create_directories(dir_ / "payloads");
  std::uint64_t skip = 0;
  if (fs::exists(dir_ / "snapshot.json")) {
    try {
      const auto snap = Json::parse(read_file(dir_ / "snapshot.json"));
      skip = snap.at("logLines").get<std::uint64_t>();
      sequence_ = snap.at("sequence").get<std::uint64_t>();
      for (const auto& e : snap.at("entries")) {
        auto entry = entry_from_json(e);
        entries_[entry.id] = std::move(entry);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, std::string("snapshot.json: ") + e.what());
    }
  }
  const auto log = dir_ / "log.jsonl";
  if (!fs::exists(log)) return;
  const std::string text = read_file(log);
  std::size_t pos = 0, good_end = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final write
    const std::string_view line(text.data() + pos, nl - pos);
    ++log_lines_;
    if (log_lines_ > skip) {
      try {
        apply(Json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse, std::string("log.jsonl: ") + e.what(), log_lines_);
      }
    }
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end != text.size()) fs::resize_file(log, good_end);
}

void LeaderboardStore::apply(const Json& ev) {
  const auto kind = ev.at("event").get<std::string>();
  if (kind == "submitted") {
    auto e = entry_from_json(ev.at("entry"));
    sequence_ = std::max(sequence_, ev.at("seq").get<std::uint64_t>());
    entries_[e.id] = std::move(e);
    return;
  }
  auto& e = entries_.at(ev.at("id").get<std::string>());
  if (kind == "running") {
    e.status = SubmissionStatus::kRunning;
  } else if (kind == "completed") {
    e.status = SubmissionStatus::kCompleted;
    e.scores = ev.at("scores");
    e.report = ev.at("report");
  } else if (kind == "failed") {
    e.status = SubmissionStatus::kFailed;
    e.error = ev.at("error").get<std::string>();
  } else {
    throw Error(ErrorCode::kParse, "unknown log event '" + kind + "'");
  }
}

void LeaderboardStore::write_event(const Json& ev) {
  std::ofstream out(dir_ / "log.jsonl", std::ios::app | std::ios::binary);
  out << ev.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + (dir_ / "log.jsonl").string());
  ++log_lines_;
  apply(ev);
}

void LeaderboardStore::append_submitted(const LeaderboardEntry& entry, std::string_view payload) {
  write_file(dir_ / "payloads" / (entry.id + ".txt"), payload);
  write_event({{"event", "submitted"}, {"seq", sequence_ + 1}, {"entry", entry_to_json(entry)}});
}

void LeaderboardStore::append_running(const std::string& id) {
  write_event({{"event", "running"}, {"id", id}});
}

void LeaderboardStore::append_completed(const std::string& id, const Json& scores,
                                        const Json& report) {
  write_event({{"event", "completed"}, {"id", id}, {"scores", scores}, {"report", report}});
  if (snapshot_every_ && ++completions_since_snapshot_ >= snapshot_every_) snapshot();
}

void LeaderboardStore::append_failed(const std::string& id, const std::string& error) {
  write_event({{"event", "failed"}, {"id", id}, {"error", error}});
}

void LeaderboardStore::snapshot() {
  Json snap;
  snap["logLines"] = log_lines_;
  snap["sequence"] = sequence_;
  Json list = Json::array();
  for (const auto& [id, e] : entries_) list.push_back(entry_to_json(e));
  snap["entries"] = std::move(list);
  const auto tmp = dir_ / "snapshot.json.tmp";
  write_file(tmp, snap.dump());
  fs::rename(tmp, dir_ / "snapshot.json");
  completions_since_snapshot_ = 0;
}

std::string LeaderboardStore::payload(const std::string& id) const {
  return read_file(dir_ / "payloads" / (id + ".txt"));
}

SubmissionService::SubmissionService(ServiceConfig config, std::map<Task, GroundTruthStore> truth,
                                     std::optional<SynsetGraph> hierarchy,
                                     std::map<std::string, std::string> tokens)
    : config_(std::move(config)),
      truth_(std::move(truth)),
      hierarchy_(std::move(hierarchy)),
      tokens_(std::move(tokens)),
      store_(config_.data_dir, config_.snapshot_every),
      limiter_(config_.submissions_per_window, config_.window_ms) {
  if (!config_.clock) config_.clock = system_clock_ms;
  for (const auto& [task, store] : truth_) {
    if (store.task != task) {
      throw Error(ErrorCode::kInvalidArgument,
                  "truth for " + std::string(task_name(task)) + " holds a different task");
    }
  }
  for (const auto& [id, e] : store_.entries()) {
    limiter_.record(rate_key(e.team, e.task), e.submitted_at);
    if ((e.status == SubmissionStatus::kQueued || e.status == SubmissionStatus::kRunning) &&
        truth_.count(e.task)) {
      queues_[e.task].ids.push_back(id);
    }
  }
  for (const auto& [task, store] : truth_) {
    auto& q = queues_[task];
    for (unsigned i = 0; i < config_.eval_workers_per_task; ++i) {
      q.workers.emplace_back([this, t = task] { worker_loop(t); });
    }
  }
}

std::unique_ptr<SubmissionService> SubmissionService::from_config(const ServiceConfig& config) {
  std::map<Task, GroundTruthStore> truth;
  for (const auto& [task, dir] : config.truth_dirs) truth.emplace(task, load_ground_truth(dir));
  std::optional<SynsetGraph> graph;
  if (config.hierarchy_edges) {
    graph.emplace(parse_hierarchy(read_file(*config.hierarchy_edges),
                                  config.hierarchy_leaves ? read_file(*config.hierarchy_leaves)
                                                          : std::string()));
  }
  auto tokens = parse_tokens(read_file(config.tokens_file));
  return std::make_unique<SubmissionService>(config, std::move(truth), std::move(graph),
                                             std::move(tokens));
}

SubmissionService::~SubmissionService() { stop(); }

ServiceResponse SubmissionService::submit(const std::string& token, const std::string& task_text,
                                          const std::string& payload) {
  const std::string* team = nullptr;
  for (const auto& [t, name] : tokens_) {
    if (t.size() == token.size() && CRYPTO_memcmp(t.data(), token.data(), t.size()) == 0) {
      team = &name;
    }
  }
  if (!team || token.empty()) return {401, error_body("missing or invalid token")};
  if (payload.size() > config_.max_payload_bytes) {
    return {413, error_body("payload exceeds " + std::to_string(config_.max_payload_bytes) +
                            " bytes")};
  }
  const auto task = task_from(task_text);
  if (!task || !truth_.count(*task)) {
    return {422, error_body("unknown or closed task '" + task_text + "'")};
  }
  const auto key = rate_key(*team, *task);
  {
    std::lock_guard lock(mu_);
    if (!limiter_.allow(key, config_.clock())) {
      return {429, error_body("rate limit: " + std::to_string(config_.submissions_per_window) +
                              " submissions per rolling window")};
    }
  }
  try {
    parse_submission(*task, payload, truth_.at(*task), *team);
  } catch (const Error& e) {
    return {422, error_body(e.what(), e.line())};
  }

  std::lock_guard lock(mu_);
  const auto now = config_.clock();
  if (!limiter_.allow(key, now)) {
    return {429, error_body("rate limit: " + std::to_string(config_.submissions_per_window) +
                            " submissions per rolling window")};
  }
  char id[32];
  std::snprintf(id, sizeof id, "sub-%08llu",
                static_cast<unsigned long long>(store_.next_sequence()));
  LeaderboardEntry e;
  e.id = id;
  e.team = *team;
  e.task = *task;
  e.submitted_at = now;
  e.content_sha256 = sha256_hex(payload);
  e.digest = sha256_hex(e.id + '\n' + payload);
  e.bytes = payload.size();
  store_.append_submitted(e, payload);
  limiter_.record(key, now);
  queues_[*task].ids.push_back(e.id);
  work_cv_.notify_all();
  return {202, {{"id", e.id}, {"status", "queued"}}};
}

void SubmissionService::worker_loop(Task task) {
  std::unique_lock lock(mu_);
  auto& q = queues_[task];
  while (true) {
    work_cv_.wait(lock, [&] { return stopping_ || !q.ids.empty(); });
    if (stopping_) return;
    const auto id = q.ids.front();
    q.ids.pop_front();
    ++q.running;
    lock.unlock();
    evaluate(id);
    lock.lock();
    --q.running;
    idle_cv_.notify_all();
  }
}

void SubmissionService::evaluate(const std::string& id) {
  std::string payload, team;
  Task task;
  {
    std::lock_guard lock(mu_);
    const auto& e = store_.entries().at(id);
    team = e.team;
    task = e.task;
    store_.append_running(id);
    payload = store_.payload(id);
  }
  Json scores, report;
  try {
    const auto& truth = truth_.at(task);
    const auto sub = parse_submission(task, payload, truth, team);
    switch (task) {
      case Task::kClassification: {
        const auto r = evaluate_classification(truth, sub, hierarchy_ ? &*hierarchy_ : nullptr);
        report = to_json(r);
        scores = {{"top5Error", r.top5_error}, {"top1Error", r.top1_error}};
        if (r.hierarchical) scores["hierarchicalError"] = r.hierarchical->error;
        break;
      }
      case Task::kLocalization: {
        const auto r = localization_error(truth, sub);
        report = to_json(r);
        scores = {{"top5Error", r.top5_error}};
        break;
      }
      case Task::kDetection: {
        DetectionOptions opts;
        opts.threads = config_.eval_threads;
        const auto r = evaluate_detection(truth, sub, opts);
        report = to_json(r);
        scores = {{"meanAp", r.mean_ap}, {"apPerCategory", r.ap_per_category}};
        break;
      }
    }
  } catch (const std::exception& ex) {
    std::lock_guard lock(mu_);
    store_.append_failed(id, ex.what());
    return;
  }
  std::lock_guard lock(mu_);
  store_.append_completed(id, scores, report);
}

Json SubmissionService::ranked_entries(Task task) const {
  std::vector<const LeaderboardEntry*> done;
  for (const auto& [id, e] : store_.entries()) {
    if (e.task == task && e.status == SubmissionStatus::kCompleted) done.push_back(&e);
  }
  Json list = Json::array();
  auto row = [](const LeaderboardEntry& e, int rank) {
    return Json{{"rank", rank},           {"id", e.id},         {"team", e.team},
                {"submittedAt", e.submitted_at}, {"digest", e.digest}, {"scores", e.scores}};
  };
  if (task != Task::kDetection) {
    std::stable_sort(done.begin(), done.end(), [](const auto* a, const auto* b) {
      const double ea = a->scores.at("top5Error").template get<double>();
      const double eb = b->scores.at("top5Error").template get<double>();
      if (ea != eb) return ea < eb;
      return a->id < b->id;
    });
    int rank = 1;
    for (const auto* e : done) list.push_back(row(*e, rank++));
    return list;
  }
  if (done.empty()) return list;
  // Every entry competes on its own; the submission id stands in for the team.
  std::vector<DetectionReport> reports;
  std::map<std::string, const LeaderboardEntry*> by_id;
  for (const auto* e : done) {
    DetectionReport r;
    r.team = e->id;
    r.mean_ap = e->scores.at("meanAp").get<double>();
    r.ap_per_category = e->scores.at("apPerCategory").get<std::map<CategoryId, double>>();
    reports.push_back(std::move(r));
    by_id[e->id] = e;
  }
  const auto ranking = rank_teams(reports);
  int rank = 1;
  for (const auto& id : ranking.order) {
    auto r = row(*by_id.at(id), rank++);
    r["categoriesWon"] = ranking.categories_won.at(id);
    list.push_back(std::move(r));
  }
  return list;
}

ServiceResponse SubmissionService::leaderboard(const std::string& task_text) const {
  const auto task = task_from(task_text);
  if (!task) return {400, error_body("unknown task '" + task_text + "'")};
  std::lock_guard lock(mu_);
  return {200, {{"task", task_name(*task)}, {"entries", ranked_entries(*task)}}};
}

ServiceResponse SubmissionService::submission(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = store_.entries().find(id);
  if (it == store_.entries().end()) return {404, error_body("unknown submission '" + id + "'")};
  const auto& e = it->second;
  Json j{{"id", e.id},
         {"team", e.team},
         {"task", task_name(e.task)},
         {"status", status_name(e.status)},
         {"submittedAt", e.submitted_at},
         {"digest", e.digest},
         {"contentSha256", e.content_sha256}};
  if (e.status == SubmissionStatus::kCompleted) {
    j["scores"] = e.scores;
    j["report"] = e.report;
  }
  if (e.status == SubmissionStatus::kFailed) j["error"] = e.error;
  return {200, j};
}

int SubmissionService::start(const std::string& host, int port) {
  if (http_) throw Error(ErrorCode::kInvalidArgument, "server already started");
  http_ = std::make_unique<httplib::Server>();
  auto& srv = *http_;
  // Multipart framing adds a little on top of the file itself.
  srv.set_payload_max_length(config_.max_payload_bytes + (std::size_t{1} << 20));
  auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  srv.Post("/v1/submissions", [this, reply](const httplib::Request& req, httplib::Response& res) {
    std::string token;
    const auto auth = req.get_header_value("Authorization");
    if (auth.rfind("Bearer ", 0) == 0) token = auth.substr(7);
    std::string task = req.get_param_value("task");
    std::string payload;
    if (req.is_multipart_form_data()) {
      if (req.has_file("task")) task = req.get_file_value("task").content;
      if (req.has_file("file")) payload = req.get_file_value("file").content;
    } else {
      payload = req.body;
    }
    reply(res, submit(token, task, payload));
  });
  srv.Get("/v1/leaderboard", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, leaderboard(req.get_param_value("task")));
  });
  srv.Get(R"(/v1/submissions/([A-Za-z0-9_-]+))",
          [this, reply](const httplib::Request& req, httplib::Response& res) {
            reply(res, submission(req.matches[1]));
          });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(error_body(httplib::status_message(res.status)).dump(), "application/json");
    }
  });
  srv.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        res.status = 500;
        res.set_content(error_body("internal error").dump(), "application/json");
      });

  const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    http_.reset();
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  http_thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  return bound;
}

void SubmissionService::stop() {
  if (http_) {
    http_->stop();
    if (http_thread_.joinable()) http_thread_.join();
  }
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& [task, q] : queues_) {
    for (auto& w : q.workers) {
      if (w.joinable()) w.join();
    }
  }
  {
    std::lock_guard lock(stop_mu_);
    stopped_ = true;
  }
  stop_cv_.notify_all();
}

void SubmissionService::wait() {
  std::unique_lock lock(stop_mu_);
  stop_cv_.wait(lock, [&] { return stopped_; });
}

void SubmissionService::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] {
    for (const auto& [task, q] : queues_) {
      if (!q.ids.empty() || q.running) return false;
    }
    return true;
  });
}

}  // namespace vrc
