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

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "challenge.hpp"
#include "fixtures.hpp"
#include "vrc/service.hpp"

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string> kTokens{{"tok-a", "alpha"}, {"tok-b", "bravo"},
                                                 {"tok-c", "charlie"}};

vrc::ServiceConfig config_for(const fs::path& dir, std::atomic<std::int64_t>& now) {
  vrc::ServiceConfig cfg;
  cfg.data_dir = dir;
  cfg.clock = [&now] { return now.load(); };
  return cfg;
}

std::map<vrc::Task, vrc::GroundTruthStore> det_truth() {
  return {{vrc::Task::kDetection, challenge::truth()}};
}

vrc::GroundTruthStore cls_truth() {
  vrc::GroundTruthStore t;
  t.task = vrc::Task::kClassification;
  t.categories = {"x", "y"};
  for (const char* id : {"a", "b", "c", "d"}) {
    t.images.emplace(id, vrc::make_image(id, 10, 10));
    t.labels[id] = "x";
  }
  return t;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(vrc::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(vrc::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("token files") {
  const auto t = vrc::parse_tokens("# comment\nalpha\ts3cret\n\nbravo\tother\r\n");
  CHECK(t.at("s3cret") == "alpha");
  CHECK(t.at("other") == "bravo");
  try {
    vrc::parse_tokens("alpha\tx\nbravo x\n");
    FAIL("accepted");
  } catch (const vrc::Error& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(vrc::parse_tokens("a\tx\nb\tx\n"), vrc::Error);
}

TEST_CASE("rolling window") {
  vrc::RateLimiter r(2, 1000);
  CHECK(r.allow("k", 0));
  r.record("k", 0);
  r.record("k", 10);
  CHECK_FALSE(r.allow("k", 999));
  CHECK(r.allow("k", 1000));
  CHECK(r.in_window("k", 1000) == 1);
  CHECK(r.allow("other", 5));
}

TEST_CASE("store survives restarts and torn writes") {
  fixtures::TempDir dir;
  vrc::LeaderboardEntry e;
  e.id = "sub-00000001";
  e.team = "alpha";
  e.task = vrc::Task::kDetection;
  e.submitted_at = 42;
  {
    vrc::LeaderboardStore s(dir.path(), 1);
    s.append_submitted(e, "payload-1");
    s.append_running(e.id);
    s.append_completed(e.id, {{"meanAp", 0.5}}, {{"kind", "detection"}});
    e.id = "sub-00000002";
    s.append_submitted(e, "payload-2");
  }
  {
    std::ofstream log(dir / "log.jsonl", std::ios::app);
    log << R"({"event":"running","id":"sub-000)";
  }
  vrc::LeaderboardStore s(dir.path());
  REQUIRE(s.entries().size() == 2);
  CHECK(s.entries().at("sub-00000001").status == vrc::SubmissionStatus::kCompleted);
  CHECK(s.entries().at("sub-00000001").scores.at("meanAp") == 0.5);
  CHECK(s.entries().at("sub-00000002").status == vrc::SubmissionStatus::kQueued);
  CHECK(s.payload("sub-00000002") == "payload-2");
  CHECK(s.next_sequence() == 3);
  const auto log = vrc::read_file(dir / "log.jsonl");
  CHECK(log.back() == '\n');
}

TEST_CASE("config files") {
  fixtures::TempDir dir;
  vrc::write_file(dir / "svc.json", R"({"port": 9000, "dataDir": "data",
    "rateLimit": {"submissions": 3, "windowSeconds": 60},
    "truth": {"detection": "truth/det"}, "tokensFile": "tokens.tsv"})");
  ::unsetenv("VRC_TOKENS_FILE");
  auto cfg = vrc::load_service_config(dir / "svc.json");
  CHECK(cfg.port == 9000);
  CHECK(cfg.data_dir == dir / "data");
  CHECK(cfg.truth_dirs.at(vrc::Task::kDetection) == dir / "truth/det");
  CHECK(cfg.submissions_per_window == 3);
  CHECK(cfg.window_ms == 60000);
  ::setenv("VRC_TOKENS_FILE", "/elsewhere/tokens", 1);
  cfg = vrc::load_service_config(dir / "svc.json");
  CHECK(cfg.tokens_file == "/elsewhere/tokens");
  ::unsetenv("VRC_TOKENS_FILE");

  vrc::write_file(dir / "bad.json", "{\"port\": ");
  CHECK_THROWS_AS(vrc::load_service_config(dir / "bad.json"), vrc::Error);
  vrc::write_file(dir / "none.json", "{}");
  CHECK_THROWS_AS(vrc::load_service_config(dir / "none.json"), vrc::Error);
}

TEST_CASE("handler status codes") {
  fixtures::TempDir dir;
  std::atomic<std::int64_t> now{1000};
  auto cfg = config_for(dir.path(), now);
  cfg.max_payload_bytes = 4096;
  vrc::SubmissionService svc(cfg, det_truth(), std::nullopt, kTokens);

  const auto empty = svc.leaderboard("detection");
  CHECK(empty.status == 200);
  CHECK(empty.body.at("entries").empty());
  CHECK(svc.leaderboard("juggling").status == 400);
  CHECK(svc.submission("sub-99999999").status == 404);

  const std::string ok = "img000 c0 0.9 20 30 200 170\n";
  CHECK(svc.submit("", "detection", ok).status == 401);
  CHECK(svc.submit("tok-x", "detection", ok).status == 401);
  CHECK(svc.submit("tok-a", "detection", std::string(5000, 'x')).status == 413);
  CHECK(svc.submit("tok-a", "classification", ok).status == 422);
  const auto bad = svc.submit("tok-a", "detection", "img000 c9 0.9 1 1 2 2\n");
  CHECK(bad.status == 422);
  CHECK(bad.body.at("line") == 1);

  const auto r = svc.submit("tok-a", "detection", ok);
  REQUIRE(r.status == 202);
  svc.wait_idle();
  const auto got = svc.submission(r.body.at("id"));
  CHECK(got.body.at("status") == "completed");
  CHECK(got.body.at("report").at("kind") == "detection");
  CHECK(got.body.at("contentSha256") == vrc::sha256_hex(ok));
  CHECK(got.body.at("digest") != got.body.at("contentSha256"));
}

TEST_CASE("rejected submissions do not use up the allowance") {
  fixtures::TempDir dir;
  std::atomic<std::int64_t> now{1000};
  vrc::SubmissionService svc(config_for(dir.path(), now), det_truth(), std::nullopt, kTokens);
  CHECK(svc.submit("tok-b", "detection", "broken\n").status == 422);
  CHECK(svc.submit("tok-b", "detection", "broken\n").status == 422);
  CHECK(svc.submit("tok-b", "detection", challenge::submission("bravo")).status == 202);
  CHECK(svc.submit("tok-b", "detection", challenge::submission("bravo")).status == 202);
  CHECK(svc.submit("tok-b", "detection", challenge::submission("bravo")).status == 429);
  // Other teams have their own allowance.
  CHECK(svc.submit("tok-c", "detection", challenge::submission("charlie")).status == 202);
}

TEST_CASE("restart keeps the allowance and finishes queued work") {
  fixtures::TempDir dir;
  std::atomic<std::int64_t> now{5000};
  {
    vrc::SubmissionService svc(config_for(dir.path(), now), det_truth(), std::nullopt, kTokens);
    CHECK(svc.submit("tok-a", "detection", challenge::submission("alpha")).status == 202);
    CHECK(svc.submit("tok-a", "detection", challenge::submission("alpha")).status == 202);
    svc.wait_idle();
  }
  {
    // An entry logged but never evaluated, as after a crash.
    vrc::LeaderboardStore store(dir.path());
    vrc::LeaderboardEntry e;
    e.id = "sub-00000003";
    e.team = "bravo";
    e.task = vrc::Task::kDetection;
    e.submitted_at = 5000;
    store.append_submitted(e, challenge::submission("bravo"));
  }
  vrc::SubmissionService svc(config_for(dir.path(), now), det_truth(), std::nullopt, kTokens);
  svc.wait_idle();
  CHECK(svc.submission("sub-00000003").body.at("status") == "completed");
  CHECK(svc.submit("tok-a", "detection", challenge::submission("alpha")).status == 429);
  CHECK(svc.leaderboard("detection").body.at("entries").size() == 3);
}

TEST_CASE("classification board sorts by top-5 error") {
  fixtures::TempDir dir;
  std::atomic<std::int64_t> now{0};
  vrc::SubmissionService svc(config_for(dir.path(), now),
                             {{vrc::Task::kClassification, cls_truth()}}, std::nullopt, kTokens);
  REQUIRE(svc.submit("tok-a", "cls", "y\ny\nx\nx\n").status == 202);
  REQUIRE(svc.submit("tok-b", "cls", "x\nx\nx\ny\n").status == 202);
  svc.wait_idle();
  const auto board = svc.leaderboard("classification").body.at("entries");
  REQUIRE(board.size() == 2);
  CHECK(board[0].at("team") == "bravo");
  CHECK(board[0].at("scores").at("top5Error") == 0.25);
  CHECK(board[1].at("scores").at("top5Error") == 0.5);
}

TEST_CASE("http transport") {
  fixtures::TempDir dir;
  std::atomic<std::int64_t> now{0};
  auto cfg = config_for(dir.path(), now);
  cfg.max_payload_bytes = 1024;
  vrc::SubmissionService svc(cfg, det_truth(), std::nullopt, kTokens);
  const int port = svc.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  httplib::MultipartFormDataItems form{{"task", "detection", "", ""},
                                       {"file", "img000 c0 0.9 20 30 200 170\n", "sub.txt",
                                        "text/plain"}};
  auto res = cli.Post("/v1/submissions", {{"Authorization", "Bearer tok-a"}}, form);
  REQUIRE(res);
  CHECK(res->status == 202);

  res = cli.Post("/v1/submissions?task=detection", "x", "text/plain");
  REQUIRE(res);
  CHECK(res->status == 401);

  res = cli.Post("/v1/submissions?task=detection", {{"Authorization", "Bearer tok-b"}},
                 std::string(4096, 'x'), "text/plain");
  REQUIRE(res);
  CHECK(res->status == 413);

  res = cli.Post("/v1/submissions?task=detection", {{"Authorization", "Bearer tok-b"}},
                 std::string(3 << 20, 'x'), "text/plain");
  if (res) CHECK(res->status == 413);

  svc.wait_idle();
  res = cli.Get("/v1/leaderboard?task=detection");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(vrc::Json::parse(res->body).at("entries").size() == 1);

  res = cli.Get("/v1/submissions/nope");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(vrc::Json::parse(res->body).contains("error"));

  res = cli.Get("/nowhere");
  REQUIRE(res);
  CHECK(res->status == 404);
  svc.stop();
}
