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

#include "vrc/report.hpp"

#include <sstream>

namespace vrc {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

[[noreturn]] void bad_report(const std::string& what) {
  throw Error(ErrorCode::kParse, "malformed report: " + what);
}

const Json& member(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad_report(std::string("missing \"") + key + "\"");
  return j.at(key);
}

}  // namespace

Json to_json(const BoundingBox& b) { return Json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

Json to_json(const ClassificationReport& r) {
  Json j;
  j["kind"] = "classification";
  j["team"] = r.team;
  j["evaluated"] = r.evaluated;
  j["top1Error"] = r.top1_error;
  j["top5Error"] = r.top5_error;
  if (r.hierarchical) {
    j["hierarchical"] = {{"k", r.hierarchical->k},
                         {"error", r.hierarchical->error},
                         {"nonLeafComparisons", r.hierarchical->non_leaf_comparisons},
                         {"perImage", r.hierarchical->per_image}};
  } else {
    j["hierarchical"] = nullptr;
  }
  j["perClassTop5Error"] = r.per_class_top5_error;
  j["perImageTop5"] = r.per_image_top5;
  return j;
}

Json to_json(const LocalizationReport& r) {
  Json j;
  j["kind"] = "localization";
  j["team"] = r.team;
  j["iouThreshold"] = r.iou_threshold;
  j["evaluated"] = r.evaluated;
  j["blacklisted"] = r.blacklisted;
  j["top5Error"] = r.top5_error;
  j["perClassError"] = r.per_class_error;
  j["perImage"] = r.per_image;
  return j;
}

Json to_json(const DetectionReport& r, const DetectionCache* cache) {
  Json j;
  j["kind"] = "detection";
  j["team"] = r.team;
  j["meanAp"] = r.mean_ap;
  j["apPerCategory"] = r.ap_per_category;
  j["excludedCategories"] = r.excluded_categories;
  Json cats = Json::object();
  for (const auto& [cat, d] : r.categories) {
    Json c;
    c["truth"] = d.truth;
    c["detections"] = d.detections;
    c["truePositives"] = d.true_positives;
    c["ap"] = optional_number(d.ap);
    if (d.curve) {
      Json pts = Json::array();
      for (const auto& p : d.curve->points) pts.push_back({p.threshold, p.recall, p.precision});
      c["curve"] = pts;  // [score threshold, recall, precision]
    }
    cats[cat] = std::move(c);
  }
  j["categories"] = std::move(cats);
  if (cache) j["matchCache"] = cache_to_json(*cache);
  return j;
}

Json to_json(const TeamRanking& r) {
  Json j;
  j["kind"] = "ranking";
  Json order = Json::array();
  int rank = 1;
  for (const auto& team : r.order) {
    order.push_back({{"rank", rank++},
                     {"team", team},
                     {"categoriesWon", r.categories_won.at(team)},
                     {"meanAp", r.mean_ap.at(team)}});
  }
  j["order"] = std::move(order);
  j["winners"] = r.winners;
  return j;
}

Json to_json(const ConfidenceInterval& ci) {
  Json j;
  j["pointEstimate"] = ci.point;
  j["lower"] = ci.lower;
  j["upper"] = ci.upper;
  j["quantileLower"] = ci.quantile_lower;
  j["quantileUpper"] = ci.quantile_upper;
  j["roundMin"] = ci.round_min;
  j["roundMax"] = ci.round_max;
  j["roundsUsed"] = ci.rounds_used;
  j["roundsSkipped"] = ci.rounds_skipped;
  j["exhaustive"] = ci.exhaustive;
  j["converged"] = ci.converged;
  Json cps = Json::array();
  for (const auto& [lo, hi] : ci.checkpoints) cps.push_back({lo, hi});
  j["checkpoints"] = std::move(cps);
  return j;
}

Json to_json(const BootstrapConfig& cfg) {
  return {{"rounds", cfg.rounds},       {"alpha", cfg.alpha},
          {"seed", cfg.seed},           {"convergenceTol", cfg.convergence_tol},
          {"maxRounds", cfg.max_rounds}, {"exactWhenEnumerable", cfg.exact_when_enumerable}};
}

BootstrapConfig bootstrap_config_from_json(const Json& j) {
  BootstrapConfig cfg;
  if (j.is_null()) return cfg;
  try {
    cfg.rounds = j.value("rounds", cfg.rounds);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.convergence_tol = j.value("convergenceTol", cfg.convergence_tol);
    cfg.max_rounds = j.value("maxRounds", cfg.max_rounds);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.exact_when_enumerable = j.value("exactWhenEnumerable", cfg.exact_when_enumerable);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bootstrap options: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

Json to_json(const DatasetStats& s) {
  Json j;
  j["kind"] = "datasetStats";
  j["meanAvgScale"] = s.mean_avg_scale;
  j["meanInstancesPerPositiveImage"] = s.mean_instances_per_positive_image;
  j["meanNeighborsPerInstance"] = s.mean_neighbors_per_instance;
  j["meanCpl"] = optional_number(s.mean_cpl);
  j["meanClutter"] = optional_number(s.mean_clutter);
  j["excluded"] = s.excluded;
  Json classes = Json::array();
  for (const auto& c : s.classes) {
    classes.push_back({{"category", c.category},
                       {"instances", c.instances},
                       {"positiveImages", c.positive_images},
                       {"avgScale", c.avg_scale},
                       {"instancesPerPositiveImage", c.instances_per_positive_image},
                       {"neighborsPerInstance", c.neighbors_per_instance},
                       {"cpl", optional_number(c.cpl)},
                       {"clutter", optional_number(c.clutter)},
                       {"imagesWithoutWindows", c.images_without_windows}});
  }
  j["classes"] = std::move(classes);
  return j;
}

Json to_json(const PropertyBins& p) {
  Json j;
  j["property"] = p.property;
  j["tol"] = p.tol;
  Json discarded = Json::array();
  for (const auto& [bin, cat] : p.discarded) discarded.push_back({{"bin", bin}, {"category", cat}});
  j["discarded"] = std::move(discarded);
  Json bins = Json::array();
  for (const auto& b : p.bins) {
    Json e;
    e["bin"] = b.bin;
    e["assigned"] = b.assigned;
    e["retained"] = b.retained;
    e["meanScale"] = b.mean_scale;
    e["emptied"] = b.emptied;
    e["reported"] = b.reported;
    e["score"] = optional_number(b.score);
    e["ci"] = b.ci ? to_json(*b.ci) : Json(nullptr);
    e["degenerateCi"] = b.degenerate_ci;
    bins.push_back(std::move(e));
  }
  j["bins"] = std::move(bins);
  return j;
}

Json to_json(const AnnotationCost& c, bool per_image) {
  Json j;
  j["images"] = c.per_image.size();
  j["totalQueries"] = c.total;
  j["naiveQueries"] = c.naive_total;
  j["meanQueriesPerImage"] = c.mean_per_image;
  j["ratioToNaive"] = c.ratio_to_naive;
  if (per_image) j["perImage"] = c.per_image;
  return j;
}

Json to_json(const LabelSimulation& s) {
  Json j = to_json(s.cost);
  j["leafErrors"] = s.leaf_errors;
  return j;
}

Json to_json(const BoxSimulation& s) {
  return {{"images", s.images},
          {"completeImages", s.complete_images},
          {"boxes", s.boxes},
          {"accurateBoxes", s.accurate_boxes},
          {"coverageRate", s.coverage_rate()},
          {"accuracyRate", s.accuracy_rate()},
          {"tasks", s.tasks},
          {"budgetExhausted", s.budget_exhausted}};
}

Json to_json(const ConsensusSimulation& s) {
  return {{"images", s.images},
          {"accepted", s.accepted},
          {"acceptedGood", s.accepted_good},
          {"rejected", s.rejected},
          {"undecided", s.undecided},
          {"precision", s.precision()},
          {"meanAcceptPosterior", s.mean_accept_posterior},
          {"votes", s.votes}};
}

Json to_json(std::span<const OverlapFlag> flags) {
  Json j;
  j["kind"] = "overlapAudit";
  std::size_t duplicates = 0;
  Json list = Json::array();
  for (const auto& f : flags) {
    const bool dup = f.kind == OverlapKind::kDuplicate;
    duplicates += dup ? 1 : 0;
    list.push_back({{"image", f.image},
                    {"kind", dup ? "duplicate" : "crossCategory"},
                    {"a", {{"category", f.a.category}, {"index", f.a.index}, {"box", to_json(f.a.box)}}},
                    {"b", {{"category", f.b.category}, {"index", f.b.index}, {"box", to_json(f.b.box)}}},
                    {"iou", f.iou}});
  }
  j["duplicates"] = duplicates;
  j["crossCategory"] = flags.size() - duplicates;
  j["flags"] = std::move(list);
  return j;
}

Json cache_to_json(const DetectionCache& cache) {
  Json j;
  j["images"] = cache.images;
  Json cats = Json::object();
  for (const auto& [cat, entries] : cache.per_category) {
    Json list = Json::array();
    for (const auto& e : entries) {
      Json outcomes = Json::array();
      for (const auto& [score, tp] : e.outcomes) outcomes.push_back({score, tp ? 1 : 0});
      list.push_back({{"image", e.image}, {"truth", e.truth_count}, {"outcomes", std::move(outcomes)}});
    }
    cats[cat] = std::move(list);
  }
  j["perCategory"] = std::move(cats);
  return j;
}

DetectionCache cache_from_json(const Json& j) {
  DetectionCache cache;
  try {
    cache.images = member(j, "images").get<std::vector<ImageId>>();
    for (const auto& [cat, list] : member(j, "perCategory").items()) {
      auto& entries = cache.per_category[cat];
      for (const auto& e : list) {
        CachedImage c;
        c.image = e.at("image").get<std::uint32_t>();
        c.truth_count = e.at("truth").get<std::uint32_t>();
        if (c.image >= cache.images.size()) bad_report("cache image index out of range");
        for (const auto& o : e.at("outcomes")) {
          c.outcomes.emplace_back(o.at(0).get<double>(), o.at(1).get<int>() != 0);
        }
        entries.push_back(std::move(c));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad_report(e.what());
  }
  return cache;
}

DetectionReport detection_report_from_json(const Json& j) {
  if (member(j, "kind") != "detection") bad_report("not a detection report");
  DetectionReport r;
  try {
    r.team = member(j, "team").get<std::string>();
    r.mean_ap = member(j, "meanAp").get<double>();
    r.ap_per_category = member(j, "apPerCategory").get<std::map<CategoryId, double>>();
  } catch (const nlohmann::json::exception& e) {
    bad_report(e.what());
  }
  return r;
}

std::map<CategoryId, double> per_class_scores(const Json& report) {
  const auto kind = member(report, "kind").get<std::string>();
  std::map<CategoryId, double> out;
  try {
    if (kind == "detection") return member(report, "apPerCategory").get<std::map<CategoryId, double>>();
    const char* key = kind == "classification" ? "perClassTop5Error"
                      : kind == "localization" ? "perClassError"
                                               : nullptr;
    if (!key) bad_report("no per-class scores in a '" + kind + "' report");
    for (const auto& [cat, err] : member(report, key).items()) out[cat] = 1.0 - err.get<double>();
  } catch (const nlohmann::json::exception& e) {
    bad_report(e.what());
  }
  return out;
}

ConfidenceInterval bootstrap_report(const Json& report, const BootstrapConfig& cfg) {
  const auto kind = member(report, "kind").get<std::string>();
  if (kind == "detection") {
    if (!report.contains("matchCache")) {
      throw Error(ErrorCode::kInvalidArgument,
                  "detection report has no match cache; re-run eval-det without --no-cache");
    }
    return bootstrap_map(cache_from_json(report.at("matchCache")), cfg);
  }
  const char* key = kind == "classification" ? "perImageTop5"
                    : kind == "localization" ? "perImage"
                                             : nullptr;
  if (!key) bad_report("cannot bootstrap a '" + kind + "' report");
  std::vector<double> scores;
  try {
    for (const auto& [id, v] : member(report, key).items()) scores.push_back(v.get<double>());
  } catch (const nlohmann::json::exception& e) {
    bad_report(e.what());
  }
  return bootstrap_mean_metric(scores, cfg);
}

std::string stats_csv(const DatasetStats& s) {
  std::ostringstream out;
  out << "category,instances,positive_images,avg_scale,instances_per_positive_image,"
         "neighbors_per_instance,cpl,clutter\n";
  for (const auto& c : s.classes) {
    out << csv_field(c.category) << ',' << c.instances << ',' << c.positive_images << ','
        << format_double(c.avg_scale) << ',' << format_double(c.instances_per_positive_image)
        << ',' << format_double(c.neighbors_per_instance) << ',' << csv_number(c.cpl) << ','
        << csv_number(c.clutter) << '\n';
  }
  return out.str();
}

std::string bins_csv(std::span<const PropertyBins> all) {
  std::ostringstream out;
  out << "property,bin,assigned,retained,mean_scale,reported,score,ci_lower,ci_upper\n";
  for (const auto& p : all) {
    for (const auto& b : p.bins) {
      out << csv_field(p.property) << ',' << b.bin << ',' << b.assigned.size() << ','
          << b.retained.size() << ',' << format_double(b.mean_scale) << ','
          << (b.reported ? 1 : 0) << ',' << csv_number(b.score) << ','
          << csv_number(b.ci ? std::optional(b.ci->lower) : std::nullopt) << ','
          << csv_number(b.ci ? std::optional(b.ci->upper) : std::nullopt) << '\n';
    }
  }
  return out.str();
}

std::string audit_csv(std::span<const OverlapFlag> flags) {
  std::ostringstream out;
  out << "image,kind,category_a,index_a,category_b,index_b,iou\n";
  for (const auto& f : flags) {
    out << csv_field(f.image) << ','
        << (f.kind == OverlapKind::kDuplicate ? "duplicate" : "cross_category") << ','
        << csv_field(f.a.category) << ',' << f.a.index << ',' << csv_field(f.b.category) << ','
        << f.b.index << ',' << format_double(f.iou) << '\n';
  }
  return out.str();
}

}  // namespace vrc
