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

#include "vrc/vrc.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "vrc/annotation.hpp"
#include "vrc/classification.hpp"
#include "vrc/detection.hpp"
#include "vrc/localization.hpp"
#include "vrc/report.hpp"
#include "vrc/service.hpp"
#include "vrc/stats.hpp"

struct vrc_truth {
  vrc::GroundTruthStore store;
};

struct vrc_hierarchy {
  vrc::SynsetGraph graph;
};

struct vrc_server {
  vrc::ServiceConfig config;
  std::unique_ptr<vrc::SubmissionService> service;
};

namespace {

thread_local std::string g_error;
thread_local std::size_t g_error_line = 0;

vrc_status fail(vrc_status status, const std::string& message, std::size_t line = 0) {
  g_error = message;
  g_error_line = line;
  return status;
}

template <typename F>
vrc_status guarded(F&& body) {
  g_error.clear();
  g_error_line = 0;
  try {
    body();
    return VRC_OK;
  } catch (const vrc::Error& e) {
    return fail(static_cast<vrc_status>(e.code()), e.what(), e.line());
  } catch (const nlohmann::json::exception& e) {
    return fail(VRC_PARSE_ERROR, std::string("json: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(VRC_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VRC_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

vrc::Json options(const char* text) {
  if (!text || !*text) return vrc::Json::object();
  auto j = vrc::Json::parse(text);
  if (!j.is_object()) throw vrc::Error(vrc::ErrorCode::kInvalidArgument, "options must be a JSON object");
  return j;
}

void require(const void* p, const char* what) {
  if (!p) throw vrc::Error(vrc::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

std::string team_or_stem(const vrc::Json& opts, const char* path) {
  auto team = opts.value("team", std::string());
  return team.empty() ? std::filesystem::path(path).stem().string() : team;
}

vrc::SubmissionRecord load_submission(const vrc_truth* truth, vrc::Task task, const char* path,
                                      const std::string& team) {
  if (truth->store.task != task) {
    throw vrc::Error(vrc::ErrorCode::kInvalidArgument,
                     "truth directory holds " + std::string(vrc::task_name(truth->store.task)) +
                         " data, not " + std::string(vrc::task_name(task)));
  }
  return vrc::parse_submission(task, vrc::read_file(path), truth->store, team);
}

}  // namespace

extern "C" {

const char* vrc_version(void) { return "1.0.0"; }
const char* vrc_last_error(void) { return g_error.c_str(); }
size_t vrc_last_error_line(void) { return g_error_line; }

const char* vrc_status_name(vrc_status status) {
  switch (status) {
    case VRC_OK: return "ok";
    case VRC_INVALID_ARGUMENT: return "invalid_argument";
    case VRC_PARSE_ERROR: return "parse_error";
    case VRC_NOT_FOUND: return "not_found";
    case VRC_IO_ERROR: return "io_error";
    case VRC_UNAUTHORIZED: return "unauthorized";
    case VRC_PAYLOAD_TOO_LARGE: return "payload_too_large";
    case VRC_RATE_LIMITED: return "rate_limited";
    case VRC_INTERNAL: return "internal";
  }
  return "unknown";
}

void vrc_string_free(char* s) { std::free(s); }

vrc_status vrc_truth_load(const char* dir, vrc_truth** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new vrc_truth{vrc::load_ground_truth(dir)};
  });
}

void vrc_truth_free(vrc_truth* truth) { delete truth; }

vrc_status vrc_hierarchy_load(const char* edges_path, const char* leaves_path,
                              vrc_hierarchy** out) {
  return guarded([&] {
    require(edges_path, "edges_path");
    require(out, "out");
    const auto leaves = leaves_path ? vrc::read_file(leaves_path) : std::string();
    *out = new vrc_hierarchy{vrc::parse_hierarchy(vrc::read_file(edges_path), leaves)};
  });
}

void vrc_hierarchy_free(vrc_hierarchy* hierarchy) { delete hierarchy; }

vrc_status vrc_eval_classification(const vrc_truth* truth, const vrc_hierarchy* hierarchy,
                                   const char* submission_path, const char* options_json,
                                   char** report_json) {
  return guarded([&] {
    require(truth, "truth");
    require(submission_path, "submission_path");
    require(report_json, "report_json");
    const auto opts = options(options_json);
    const auto sub = load_submission(truth, vrc::Task::kClassification, submission_path,
                                     team_or_stem(opts, submission_path));
    vrc::ClassificationOptions copts;
    copts.exclude_blacklisted = opts.value("excludeBlacklisted", false);
    const auto report = vrc::evaluate_classification(truth->store, sub,
                                                     hierarchy ? &hierarchy->graph : nullptr, copts);
    *report_json = dup_string(vrc::to_json(report).dump(2));
  });
}

vrc_status vrc_eval_localization(const vrc_truth* truth, const char* submission_path,
                                 const char* options_json, char** report_json) {
  return guarded([&] {
    require(truth, "truth");
    require(submission_path, "submission_path");
    require(report_json, "report_json");
    const auto opts = options(options_json);
    const auto sub = load_submission(truth, vrc::Task::kLocalization, submission_path,
                                     team_or_stem(opts, submission_path));
    const auto report = vrc::localization_error(truth->store, sub, opts.value("iouThreshold", 0.5));
    *report_json = dup_string(vrc::to_json(report).dump(2));
  });
}

vrc_status vrc_eval_detection(const vrc_truth* truth, const char* submission_path,
                              const char* options_json, char** report_json) {
  return guarded([&] {
    require(truth, "truth");
    require(submission_path, "submission_path");
    require(report_json, "report_json");
    const auto opts = options(options_json);
    const auto sub = load_submission(truth, vrc::Task::kDetection, submission_path,
                                     team_or_stem(opts, submission_path));
    vrc::DetectionOptions dopts;
    const auto policy = opts.value("policy", std::string("adaptive"));
    if (policy == "adaptive") {
      dopts.policy = vrc::ThresholdPolicy::kAdaptive;
    } else if (policy == "fixed") {
      dopts.policy = vrc::ThresholdPolicy::kFixedHalf;
    } else {
      throw vrc::Error(vrc::ErrorCode::kInvalidArgument, "policy must be adaptive or fixed");
    }
    dopts.include_curves = opts.value("curves", false);
    dopts.threads = opts.value("threads", 1u);
    vrc::DetectionCache cache;
    const bool with_cache = opts.value("cache", true);
    const auto report = vrc::evaluate_detection(truth->store, sub, dopts, with_cache ? &cache : nullptr);
    *report_json = dup_string(vrc::to_json(report, with_cache ? &cache : nullptr).dump(2));
  });
}

vrc_status vrc_rank(const char* reports_json, char** ranking_json) {
  return guarded([&] {
    require(reports_json, "reports_json");
    require(ranking_json, "ranking_json");
    const auto list = vrc::Json::parse(reports_json);
    if (!list.is_array()) throw vrc::Error(vrc::ErrorCode::kInvalidArgument, "expected a JSON array");
    std::vector<vrc::DetectionReport> reports;
    for (const auto& r : list) reports.push_back(vrc::detection_report_from_json(r));
    *ranking_json = dup_string(vrc::to_json(vrc::rank_teams(reports)).dump(2));
  });
}

vrc_status vrc_bootstrap(const char* report_json, const char* options_json, char** report_out) {
  return guarded([&] {
    require(report_json, "report_json");
    require(report_out, "report_out");
    auto report = vrc::Json::parse(report_json);
    const auto cfg = vrc::bootstrap_config_from_json(options(options_json));
    const auto ci = vrc::bootstrap_report(report, cfg);
    auto block = vrc::to_json(ci);
    block["metric"] = report.value("kind", "") == "detection" ? "meanAp" : "top5Error";
    block["config"] = vrc::to_json(cfg);
    report["bootstrap"] = std::move(block);
    *report_out = dup_string(report.dump(2));
  });
}

vrc_status vrc_stats(const vrc_truth* truth, const char* options_json, char** stats_json,
                     char** classes_csv, char** bins_csv) {
  return guarded([&] {
    require(truth, "truth");
    require(stats_json, "stats_json");
    const auto opts = options(options_json);
    vrc::DatasetStatsOptions sopts;
    sopts.neighbor_gap = opts.value("neighborGap", 0.0);
    vrc::WindowRankings windows;
    if (opts.contains("windows")) {
      windows = vrc::parse_window_rankings(vrc::read_file(opts.at("windows").get<std::string>()),
                                           truth->store.image_ids());
      sopts.windows = &windows;
    }
    const auto stats = vrc::dataset_stats(truth->store, sopts);
    vrc::Json out = vrc::to_json(stats);

    std::map<vrc::CategoryId, double> avg_scale;
    for (const auto& c : stats.classes) avg_scale[c.category] = c.avg_scale;

    std::map<vrc::CategoryId, double> scores;
    if (opts.contains("scoreReports")) {
      std::vector<std::map<vrc::CategoryId, double>> entries;
      for (const auto& path : opts.at("scoreReports")) {
        entries.push_back(vrc::per_class_scores(vrc::Json::parse(vrc::read_file(path.get<std::string>()))));
      }
      scores = vrc::optimistic_per_class(entries);
      out["optimisticPerClass"] = scores;
      const auto corr = vrc::scale_accuracy_correlation(avg_scale, scores);
      out["scaleCorrelation"] = {{"rho", corr.rho ? vrc::Json(*corr.rho) : vrc::Json(nullptr)},
                                 {"pairs", corr.pairs}};
    }

    std::vector<vrc::PropertyBins> all_bins;
    if (opts.contains("properties")) {
      const auto annotations =
          vrc::parse_property_annotations(vrc::read_file(opts.at("properties").get<std::string>()));
      std::map<std::string, std::map<vrc::CategoryId, int>> by_property;
      for (const auto& a : annotations) {
        if (!avg_scale.count(a.category)) continue;
        if (!scores.empty() && !scores.count(a.category)) continue;
        by_property[a.property][a.category] = a.bin;
      }
      const auto cfg = vrc::bootstrap_config_from_json(opts.value("bootstrap", vrc::Json::object()));
      for (const auto& [property, assignment] : by_property) {
        auto bins = vrc::normalize_bins_by_scale(property, assignment, avg_scale,
                                                 opts.value("tol", 0.01),
                                                 opts.value("minClasses", std::size_t{5}));
        if (!scores.empty()) vrc::bin_score_ci(bins, avg_scale, scores, cfg);
        all_bins.push_back(std::move(bins));
      }
      vrc::Json props = vrc::Json::array();
      for (const auto& b : all_bins) props.push_back(vrc::to_json(b));
      out["properties"] = std::move(props);
    }

    *stats_json = dup_string(out.dump(2));
    if (classes_csv) *classes_csv = dup_string(vrc::stats_csv(stats));
    if (bins_csv) *bins_csv = dup_string(vrc::bins_csv(all_bins));
  });
}

vrc_status vrc_annotate_sim(const char* tree_path, const char* options_json, char** report_json) {
  return guarded([&] {
    require(tree_path, "tree_path");
    require(report_json, "report_json");
    const auto opts = options(options_json);
    const vrc::QuestionTree tree(vrc::parse_question_tree(vrc::read_file(tree_path)));
    const auto seed = opts.value("seed", std::uint64_t{0});
    vrc::Json out;
    out["kind"] = "annotationSimulation";
    out["seed"] = seed;
    out["queries"] = tree.size();
    out["categories"] = tree.category_count();
    out["roots"] = tree.roots().size();

    const auto images = opts.value("images", std::size_t{1000});
    const auto sparsity = opts.value("sparsity", 0.02);
    const auto noise = opts.value("answerNoise", 0.0);
    const auto labels = vrc::simulate_labeling(tree, images, sparsity, noise, seed);
    auto lj = vrc::to_json(labels);
    lj["sparsity"] = sparsity;
    lj["answerNoise"] = noise;
    if (opts.value("perImage", false)) lj["perImage"] = labels.cost.per_image;
    out["labeling"] = std::move(lj);

    if (const auto n = opts.value("boxImages", std::size_t{0}); n > 0) {
      vrc::WorkflowNoise wn;
      wn.draw_error = opts.value("drawError", wn.draw_error);
      wn.quality_flip = opts.value("qualityFlip", wn.quality_flip);
      wn.coverage_flip = opts.value("coverageFlip", wn.coverage_flip);
      const auto sim = vrc::simulate_bbox_workflow(n, opts.value("maxInstances", 4), wn, seed);
      out["boxes"] = vrc::to_json(sim);
    }
    if (const auto n = opts.value("consensusImages", std::size_t{0}); n > 0) {
      vrc::ConsensusSimConfig cc;
      cc.images = n;
      cc.seed = seed;
      cc.threshold = opts.value("threshold", cc.threshold);
      cc.vote_cap = opts.value("voteCap", cc.vote_cap);
      cc.good_rate = opts.value("goodRate", cc.good_rate);
      cc.worker_flip = opts.value("workerFlip", cc.worker_flip);
      out["consensus"] = vrc::to_json(vrc::simulate_consensus(cc));
    }
    *report_json = dup_string(out.dump(2));
  });
}

vrc_status vrc_audit(const vrc_truth* truth, const char* options_json, char** audit_json,
                     char** csv_out) {
  return guarded([&] {
    require(truth, "truth");
    require(audit_json, "audit_json");
    const auto opts = options(options_json);
    const auto flags = vrc::audit_overlaps(truth->store, opts.value("crossThreshold", 0.5));
    *audit_json = dup_string(vrc::to_json(flags).dump(2));
    if (csv_out) *csv_out = dup_string(vrc::audit_csv(flags));
  });
}

vrc_status vrc_server_create(const char* config_path, vrc_server** out) {
  return guarded([&] {
    require(config_path, "config_path");
    require(out, "out");
    auto server = std::make_unique<vrc_server>();
    server->config = vrc::load_service_config(config_path);
    server->service = vrc::SubmissionService::from_config(server->config);
    *out = server.release();
  });
}

vrc_status vrc_server_start(vrc_server* server, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(server, "server");
    const int p = server->service->start(host ? host : server->config.host,
                                         port < 0 ? server->config.port : port);
    if (bound_port) *bound_port = p;
  });
}

vrc_status vrc_server_stop(vrc_server* server) {
  return guarded([&] {
    require(server, "server");
    server->service->stop();
  });
}

void vrc_server_free(vrc_server* server) { delete server; }

}  // extern "C"
