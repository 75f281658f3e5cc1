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

// vrc: offline evaluation, statistics and simulation front end.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vrc/vrc.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kTruthFormat = R"(
Ground-truth directory:
  task            classification | localization | detection
  images.tsv      image_id width height
  categories.txt  category_id
  labels.tsv      image_id category_id           (classification, localization)
  boxes.tsv       image_id category_id xmin ymin xmax ymax
  blacklist.tsv   image_id | image_id category_id   (optional)
Fields are whitespace separated; '#' starts a comment line.)";

constexpr const char* kClsFormat = R"(
Submission: one line per image in ascending image_id order, 1 to 5 category ids
separated by whitespace, best guess first.)";

constexpr const char* kLocFormat = R"(
Submission: one line per image in ascending image_id order, 1 to 5 groups of
`category_id xmin ymin xmax ymax`.)";

constexpr const char* kDetFormat = R"(
Submission: one detection per line,
`image_id category_id score xmin ymin xmax ymax`, any order.)";

constexpr const char* kHierarchyFormat = R"(
Hierarchy: `parent_id<TAB>child_id` per line. Leaf manifest: one category
id per line (defaults to nodes without children).)";

constexpr const char* kTreeFormat = R"(
Question tree, one record per line:
  Q<TAB>query_id                      declare a query
  E<TAB>parent_query<TAB>child_query  edge
  B<TAB>leaf_query<TAB>category_id    bind a leaf to a category)";

constexpr const char* kStatsFormat = R"(
Windows: `image_id rank xmin ymin xmax ymax`, rank in 1..1000.
Properties: `category_id<TAB>property<TAB>bin` with integer bins.
Score reports: JSON reports from eval-cls, eval-loc or eval-det; the
best per-class score over all reports is used.)";

constexpr const char* kReportFormat = R"(
Reports are the JSON files written by eval-cls, eval-loc and eval-det.
Detection reports must carry their match cache (the default).)";

std::atomic<bool> g_stop{false};

struct Failure {
  int exit_code;
};

void check(vrc_status status) {
  if (status == VRC_OK) return;
  std::cerr << "error (" << vrc_status_name(status) << "): " << vrc_last_error() << "\n";
  throw Failure{status == VRC_INTERNAL ? 2 : 1};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { vrc_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

void write_out(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{1};
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    throw Failure{1};
  }
  return ss.str();
}

struct Truth {
  vrc_truth* t = nullptr;
  explicit Truth(const std::string& dir) { check(vrc_truth_load(dir.c_str(), &t)); }
  ~Truth() { vrc_truth_free(t); }
};

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Large-scale visual recognition challenge evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for parallel stages")->check(CLI::Range(1u, 1024u));
  app.set_version_flag("--version", std::string(vrc_version()));

  // eval-cls
  std::string truth_dir, sub_path, out_path, team, hierarchy, leaves;
  bool exclude_blacklisted = false;
  auto* cls = app.add_subcommand("eval-cls", "Top-1/top-5 and hierarchical classification error");
  cls->add_option("--truth", truth_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  cls->add_option("--sub", sub_path, "Submission file")->required()->check(CLI::ExistingFile);
  cls->add_option("--out", out_path, "JSON report path")->required();
  cls->add_option("--team", team, "Team name (default: submission file stem)");
  cls->add_option("--hierarchy", hierarchy, "Hierarchy edge list for hierarchical error")->check(CLI::ExistingFile);
  cls->add_option("--leaves", leaves, "Leaf manifest")->check(CLI::ExistingFile)->needs("--hierarchy");
  cls->add_flag("--exclude-blacklisted", exclude_blacklisted, "Drop blacklisted images");
  cls->footer(std::string(kTruthFormat) + "\n" + kClsFormat + "\n" + kHierarchyFormat);

  // eval-loc
  double iou_threshold = 0.5;
  auto* loc = app.add_subcommand("eval-loc", "Top-5 localization error");
  loc->add_option("--truth", truth_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  loc->add_option("--sub", sub_path, "Submission file")->required()->check(CLI::ExistingFile);
  loc->add_option("--out", out_path, "JSON report path")->required();
  loc->add_option("--team", team, "Team name (default: submission file stem)");
  loc->add_option("--iou", iou_threshold, "A guess must exceed this IOU")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  loc->footer(std::string(kTruthFormat) + "\n" + kLocFormat);

  // eval-det
  std::string policy = "adaptive";
  bool curves = false, no_cache = false;
  auto* det = app.add_subcommand("eval-det", "Average precision per category and mAP");
  det->add_option("--truth", truth_dir, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
  det->add_option("--sub", sub_path, "Submission file")->required()->check(CLI::ExistingFile);
  det->add_option("--out", out_path, "JSON report path")->required();
  det->add_option("--team", team, "Team name (default: submission file stem)");
  det->add_option("--policy", policy, "IOU threshold policy")->check(CLI::IsMember({"adaptive", "fixed"}));
  det->add_flag("--curves", curves, "Include precision/recall curves");
  det->add_flag("--no-cache", no_cache, "Omit the per-image match cache (disables bootstrap)");
  det->footer(std::string(kTruthFormat) + "\n" + kDetFormat);

  // rank
  std::vector<std::string> reports;
  auto* rank = app.add_subcommand("rank", "Rank teams by categories won, then mAP");
  rank->add_option("--reports", reports, "Detection reports, one per team")->required()->check(CLI::ExistingFile);
  rank->add_option("--out", out_path, "JSON ranking path")->required();
  rank->footer(kReportFormat);

  // bootstrap
  std::string report_path;
  std::size_t rounds = 20000, max_rounds = 0;
  double alpha = 0.0005, tol = 1e-4;
  std::uint64_t seed = 0;
  auto* boot = app.add_subcommand("bootstrap", "Confidence interval for a report's headline metric");
  boot->add_option("--report", report_path, "Evaluation report")->required()->check(CLI::ExistingFile);
  boot->add_option("--out", out_path, "Output path (default: update the report in place)");
  boot->add_option("--rounds", rounds, "Bootstrap rounds")->capture_default_str()->check(CLI::PositiveNumber);
  boot->add_option("--alpha", alpha, "Tail fraction per side")->capture_default_str();
  boot->add_option("--seed", seed, "Random seed")->capture_default_str();
  boot->add_option("--tol", tol, "Endpoint drift tolerance for convergence")->capture_default_str();
  boot->add_option("--max-rounds", max_rounds, "Double rounds up to this many until converged");
  boot->footer(kReportFormat);

  // stats
  std::string csv_path, bins_csv_path, windows_path, properties_path;
  std::vector<std::string> score_reports;
  double bin_tol = 0.01, neighbor_gap = 0.0;
  std::size_t min_classes = 5;
  auto* stats = app.add_subcommand("stats", "Dataset difficulty statistics and property bins");
  stats->add_option("--truth", truth_dir, "Ground-truth directory (with boxes)")->required()->check(CLI::ExistingDirectory);
  stats->add_option("--out", out_path, "JSON report path")->required();
  stats->add_option("--csv", csv_path, "Per-class CSV path");
  stats->add_option("--bins-csv", bins_csv_path, "Property bin CSV path");
  stats->add_option("--windows", windows_path, "Objectness window rankings")->check(CLI::ExistingFile);
  stats->add_option("--properties", properties_path, "Property bin annotations")->check(CLI::ExistingFile);
  stats->add_option("--scores", score_reports, "Evaluation reports supplying per-class scores")->check(CLI::ExistingFile);
  stats->add_option("--tol", bin_tol, "Scale normalization tolerance")->capture_default_str();
  stats->add_option("--min-classes", min_classes, "Smallest reported bin")->capture_default_str();
  stats->add_option("--neighbor-gap", neighbor_gap, "Neighbor gap in pixels")->capture_default_str();
  stats->add_option("--rounds", rounds, "Bootstrap rounds for bin CIs")->capture_default_str()->check(CLI::PositiveNumber);
  stats->add_option("--alpha", alpha, "Tail fraction per side")->capture_default_str();
  stats->add_option("--seed", seed, "Random seed")->capture_default_str();
  stats->footer(std::string(kTruthFormat) + "\n" + kStatsFormat);

  // annotate-sim
  std::string tree_path;
  std::size_t images = 1000, box_images = 0, consensus_images = 0;
  double sparsity = 0.02, answer_noise = 0.0, draw_error = 0.0, quality_flip = 0.0, coverage_flip = 0.0;
  double threshold = 0.97;
  int max_instances = 4, vote_cap = 15;
  bool per_image = false;
  auto* sim = app.add_subcommand("annotate-sim", "Simulate hierarchical labeling and crowd workflows");
  sim->add_option("--tree", tree_path, "Question tree file")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "JSON report path")->required();
  sim->add_option("--images", images, "Images to label")->capture_default_str();
  sim->add_option("--sparsity", sparsity, "Probability that a category is present")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sim->add_option("--seed", seed, "Random seed")->capture_default_str();
  sim->add_option("--answer-noise", answer_noise, "Probability that an answer is flipped")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  sim->add_flag("--per-image", per_image, "Include per-image query counts");
  sim->add_option("--box-images", box_images, "Images for the box workflow simulation");
  sim->add_option("--max-instances", max_instances, "Instances per image in the box simulation")->capture_default_str();
  sim->add_option("--draw-error", draw_error, "P(drawn box is loose)")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--quality-flip", quality_flip, "P(wrong quality verdict)")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--coverage-flip", coverage_flip, "P(wrong coverage verdict)")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--consensus-images", consensus_images, "Images for the consensus simulation");
  sim->add_option("--threshold", threshold, "Consensus confidence threshold")->capture_default_str();
  sim->add_option("--vote-cap", vote_cap, "Votes before an image is left undecided")->capture_default_str();
  sim->footer(kTreeFormat);

  // audit
  double cross_threshold = 0.5;
  auto* audit = app.add_subcommand("audit", "Flag duplicate and cross-category box overlaps");
  audit->add_option("--truth", truth_dir, "Ground-truth directory (with boxes)")->required()->check(CLI::ExistingDirectory);
  audit->add_option("--out", out_path, "JSON report path")->required();
  audit->add_option("--csv", csv_path, "CSV path");
  audit->add_option("--cross-threshold", cross_threshold, "IOU above which different categories are flagged")->capture_default_str();
  audit->footer(kTruthFormat);

  // serve
  std::string config_path, host;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the submission server");
  serve->add_option("--config", config_path, "Server config JSON")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Override the configured host");
  serve->add_option("--port", port, "Override the configured port (0 picks a free port)");
  serve->footer(R"(
Config JSON keys: host, port, dataDir, maxPayloadBytes,
rateLimit {submissions, windowSeconds}, snapshotEvery, evalWorkersPerTask,
evalThreads, truth {classification, localization, detection: dir},
hierarchy {edges, leaves}, tokensFile. VRC_TOKENS_FILE overrides tokensFile.
Tokens file: `team<TAB>token` per line.
Endpoints: POST /v1/submissions (Bearer token; multipart fields task, file,
or a raw body with ?task=), GET /v1/leaderboard?task=, GET /v1/submissions/{id}.)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (cls->parsed()) {
      Truth truth(truth_dir);
      vrc_hierarchy* h = nullptr;
      if (!hierarchy.empty()) {
        check(vrc_hierarchy_load(hierarchy.c_str(), leaves.empty() ? nullptr : leaves.c_str(), &h));
      }
      Json opts{{"team", team}, {"excludeBlacklisted", exclude_blacklisted}};
      Owned out;
      const auto status = vrc_eval_classification(truth.t, h, sub_path.c_str(), opts.dump().c_str(), &out.p);
      vrc_hierarchy_free(h);
      check(status);
      write_out(out_path, out.str());
      const auto j = Json::parse(out.str());
      std::cout << "team " << j["team"].get<std::string>() << ": top-5 error "
                << percent(j["top5Error"]) << ", top-1 error " << percent(j["top1Error"]);
      if (!j["hierarchical"].is_null()) std::cout << ", hierarchical " << j["hierarchical"]["error"].get<double>();
      std::cout << " over " << j["evaluated"] << " images\n";
    } else if (loc->parsed()) {
      Truth truth(truth_dir);
      Json opts{{"team", team}, {"iouThreshold", iou_threshold}};
      Owned out;
      check(vrc_eval_localization(truth.t, sub_path.c_str(), opts.dump().c_str(), &out.p));
      write_out(out_path, out.str());
      const auto j = Json::parse(out.str());
      std::cout << "team " << j["team"].get<std::string>() << ": top-5 localization error "
                << percent(j["top5Error"]) << " over " << j["evaluated"] << " images\n";
    } else if (det->parsed()) {
      Truth truth(truth_dir);
      Json opts{{"team", team}, {"policy", policy}, {"curves", curves}, {"cache", !no_cache}, {"threads", threads}};
      Owned out;
      check(vrc_eval_detection(truth.t, sub_path.c_str(), opts.dump().c_str(), &out.p));
      write_out(out_path, out.str());
      const auto j = Json::parse(out.str());
      std::cout << "team " << j["team"].get<std::string>() << ": mAP " << percent(j["meanAp"])
                << " over " << j["apPerCategory"].size() << " categories\n";
    } else if (rank->parsed()) {
      Json list = Json::array();
      for (const auto& r : reports) list.push_back(Json::parse(slurp(r)));
      Owned out;
      check(vrc_rank(list.dump().c_str(), &out.p));
      write_out(out_path, out.str());
      for (const auto& row : Json::parse(out.str())["order"]) {
        std::cout << row["rank"] << ". " << row["team"].get<std::string>() << "  won "
                  << row["categoriesWon"] << "  mAP " << percent(row["meanAp"]) << "\n";
      }
    } else if (boot->parsed()) {
      Json opts{{"rounds", rounds}, {"alpha", alpha}, {"seed", seed}, {"convergenceTol", tol},
                {"maxRounds", max_rounds}, {"threads", threads}};
      Owned out;
      check(vrc_bootstrap(slurp(report_path).c_str(), opts.dump().c_str(), &out.p));
      write_out(out_path.empty() ? report_path : out_path, out.str());
      const auto b = Json::parse(out.str())["bootstrap"];
      std::cout << b["metric"].get<std::string>() << " " << b["pointEstimate"].get<double>() << " ["
                << b["lower"].get<double>() << ", " << b["upper"].get<double>() << "] from "
                << b["roundsUsed"] << " rounds\n";
    } else if (stats->parsed()) {
      Truth truth(truth_dir);
      Json opts{{"neighborGap", neighbor_gap}, {"tol", bin_tol}, {"minClasses", min_classes},
                {"bootstrap", {{"rounds", rounds}, {"alpha", alpha}, {"seed", seed}, {"threads", threads}}}};
      if (!windows_path.empty()) opts["windows"] = windows_path;
      if (!properties_path.empty()) opts["properties"] = properties_path;
      if (!score_reports.empty()) opts["scoreReports"] = score_reports;
      Owned out, csv, bins;
      check(vrc_stats(truth.t, opts.dump().c_str(), &out.p, &csv.p, &bins.p));
      write_out(out_path, out.str());
      if (!csv_path.empty()) write_out(csv_path, csv.str());
      if (!bins_csv_path.empty()) write_out(bins_csv_path, bins.str());
      const auto j = Json::parse(out.str());
      std::cout << j["classes"].size() << " categories; mean scale " << j["meanAvgScale"].get<double>()
                << ", instances/image " << j["meanInstancesPerPositiveImage"].get<double>();
      if (!j["meanCpl"].is_null()) std::cout << ", mean CPL " << j["meanCpl"].get<double>();
      if (!j["meanClutter"].is_null()) std::cout << ", mean clutter " << j["meanClutter"].get<double>();
      std::cout << "\n";
    } else if (sim->parsed()) {
      Json opts{{"images", images}, {"sparsity", sparsity}, {"answerNoise", answer_noise},
                {"seed", seed}, {"perImage", per_image}, {"boxImages", box_images},
                {"maxInstances", max_instances}, {"drawError", draw_error},
                {"qualityFlip", quality_flip}, {"coverageFlip", coverage_flip},
                {"consensusImages", consensus_images}, {"threshold", threshold}, {"voteCap", vote_cap}};
      Owned out;
      check(vrc_annotate_sim(tree_path.c_str(), opts.dump().c_str(), &out.p));
      write_out(out_path, out.str());
      const auto l = Json::parse(out.str())["labeling"];
      std::cout << "mean queries/image " << l["meanQueriesPerImage"].get<double>() << " ("
                << percent(l["ratioToNaive"]) << " of naive)\n";
    } else if (audit->parsed()) {
      Truth truth(truth_dir);
      Json opts{{"crossThreshold", cross_threshold}};
      Owned out, csv;
      check(vrc_audit(truth.t, opts.dump().c_str(), &out.p, &csv.p));
      write_out(out_path, out.str());
      if (!csv_path.empty()) write_out(csv_path, csv.str());
      const auto j = Json::parse(out.str());
      std::cout << j["duplicates"] << " duplicate and " << j["crossCategory"]
                << " cross-category overlaps flagged\n";
    } else if (serve->parsed()) {
      vrc_server* server = nullptr;
      check(vrc_server_create(config_path.c_str(), &server));
      int bound = 0;
      const auto status = vrc_server_start(server, host.empty() ? nullptr : host.c_str(), port, &bound);
      if (status != VRC_OK) {
        vrc_server_free(server);
        check(status);
      }
      std::cout << "listening on port " << bound << std::endl;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      vrc_server_stop(server);
      vrc_server_free(server);
    }
  } catch (const Failure& f) {
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
