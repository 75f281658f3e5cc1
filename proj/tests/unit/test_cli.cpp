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


#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "text_fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run run(const std::string& args) {
  const std::string cmd = std::string(VRC_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  while (const auto n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct Scratch {
  fs::path path;
  Scratch() {
    static int n = 0;
    path = fs::temp_directory_path() /
           ("vrc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

json read_json(const std::string& path) { return json::parse(textfix::get(path)); }

}  // namespace

TEST_CASE("help and usage errors") {
  auto r = run("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"eval-cls", "eval-loc", "eval-det", "rank", "bootstrap", "stats",
                          "annotate-sim", "audit", "serve"}) {
    CHECK_MESSAGE(r.output.find(sub) != std::string::npos, sub);
  }
  r = run("eval-det --help");
  CHECK(r.code == 0);
  CHECK(r.output.find("xmin") != std::string::npos);

  r = run("eval-det --bogus");
  CHECK(r.code == 1);
  r = run("");
  CHECK(r.code == 1);
  r = run("eval-det --truth /nonexistent --sub /nonexistent --out x.json");
  CHECK(r.code == 1);
}

TEST_CASE("detection pipeline") {
  Scratch s;
  textfix::detection_truth(s / "truth");
  textfix::put(s / "alpha.txt", textfix::detection_submission());
  textfix::put(s / "bravo.txt", "img0 c1 0.5 70 70 90 75\n");

  auto r = run("eval-det --truth " + s / "truth" + " --sub " + s / "alpha.txt" + " --out " +
               s / "alpha.json");
  REQUIRE(r.code == 0);
  const auto alpha = read_json(s / "alpha.json");
  CHECK(alpha.at("team") == "alpha");
  CHECK(alpha.at("meanAp").get<double>() == doctest::Approx(0.75));
  CHECK(alpha.contains("matchCache"));

  r = run("eval-det --truth " + s / "truth" + " --sub " + s / "bravo.txt" + " --out " +
          s / "bravo.json --policy fixed --no-cache --team B");
  REQUIRE(r.code == 0);
  const auto bravo = read_json(s / "bravo.json");
  CHECK(bravo.at("team") == "B");
  CHECK_FALSE(bravo.contains("matchCache"));

  r = run("rank --reports " + s / "bravo.json" + " " + s / "alpha.json" + " --out " +
          s / "rank.json");
  REQUIRE(r.code == 0);
  CHECK(read_json(s / "rank.json").at("order").at(0).at("team") == "alpha");

  r = run("bootstrap --report " + s / "alpha.json" + " --out " + s / "boot.json" +
          " --rounds 100 --seed 3");
  REQUIRE(r.code == 0);
  const auto boot = read_json(s / "boot.json");
  CHECK(boot.at("bootstrap").at("lower").get<double>() <= 0.75);
  CHECK(boot.at("bootstrap").at("upper").get<double>() >= 0.75);
  CHECK(boot.at("meanAp") == alpha.at("meanAp"));

  // Without a cache there is nothing to resample.
  r = run("bootstrap --report " + s / "bravo.json" + " --out " + s / "nope.json");
  CHECK(r.code == 1);
}

TEST_CASE("parse errors cite the line") {
  Scratch s;
  textfix::detection_truth(s / "truth");
  textfix::put(s / "bad.txt", "img0 c0 0.9 1 1 5 5\nimg2 c0 0.8 1 1 5 5\nimg1 c0 high 1 1 5 5\n");
  const auto r = run("eval-det --truth " + s / "truth" + " --sub " + s / "bad.txt" + " --out " +
                     s / "bad.json");
  CHECK(r.code == 1);
  CHECK(r.output.find("parse_error") != std::string::npos);
  CHECK(r.output.find("line 3") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "bad.json"));
}

TEST_CASE("classification") {
  Scratch s;
  textfix::classification_truth(s / "truth");
  textfix::hierarchy(s / "edges.tsv");
  textfix::put(s / "team.txt", "dog\ncat dog\ndog car\ncar\n");
  const auto r = run("eval-cls --truth " + s / "truth" + " --sub " + s / "team.txt" + " --out " +
                     s / "cls.json --hierarchy " + s / "edges.tsv" + " --exclude-blacklisted");
  REQUIRE(r.code == 0);
  const auto j = read_json(s / "cls.json");
  CHECK(j.at("evaluated") == 3);
  CHECK(j.at("top1Error").get<double>() == doctest::Approx(1.0 / 3));
  CHECK(j.at("hierarchical").at("error").get<double>() == doctest::Approx(0.0));
}

TEST_CASE("stats and audit") {
  Scratch s;
  textfix::detection_truth(s / "truth");
  auto r = run("stats --truth " + s / "truth" + " --out " + s / "stats.json --csv " +
               s / "classes.csv");
  REQUIRE(r.code == 0);
  CHECK(read_json(s / "stats.json").at("kind") == "datasetStats");
  CHECK(textfix::get(s / "classes.csv").find("c1") != std::string::npos);

  r = run("audit --truth " + s / "truth" + " --out " + s / "audit.json --csv " + s / "audit.csv");
  REQUIRE(r.code == 0);
  CHECK(read_json(s / "audit.json").at("crossCategory") == 1);
  CHECK(textfix::get(s / "audit.csv").find("img0") != std::string::npos);
}

TEST_CASE("annotate-sim is reproducible") {
  Scratch s;
  textfix::question_tree(s / "tree.tsv");
  const std::string args = "annotate-sim --tree " + s / "tree.tsv" +
                           " --images 300 --sparsity 0.25 --seed 42 --box-images 40 --out ";
  REQUIRE(run(args + s / "one.json").code == 0);
  REQUIRE(run(args + s / "two.json").code == 0);
  REQUIRE(run("--threads 3 " + args + s / "three.json").code == 0);
  CHECK(textfix::get(s / "one.json") == textfix::get(s / "two.json"));
  CHECK(textfix::get(s / "one.json") == textfix::get(s / "three.json"));
  CHECK(read_json(s / "one.json").at("seed") == 42);

  REQUIRE(run("annotate-sim --tree " + s / "tree.tsv" +
              " --images 300 --sparsity 0.25 --seed 43 --out " + s / "other.json")
              .code == 0);
  CHECK(textfix::get(s / "one.json") != textfix::get(s / "other.json"));
}
