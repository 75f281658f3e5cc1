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

#include "vrc/detection.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "vrc/parallel.hpp"

namespace vrc {

double adaptive_threshold(const BoundingBox& truth_box) noexcept {
  const double w = truth_box.width();
  const double h = truth_box.height();
  return std::min(0.5, (w * h) / ((w + 10.0) * (h + 10.0)));
}

double match_threshold(const BoundingBox& truth_box, ThresholdPolicy policy) noexcept {
  return policy == ThresholdPolicy::kAdaptive ? adaptive_threshold(truth_box) : 0.5;
}

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(std::count_if(
      detections.begin(), detections.end(), [](const auto& d) { return d.true_positive; }));
}

MatchResult match_detections(std::span<const ScoredBox> detections,
                             std::span<const BoundingBox> truth, ThresholdPolicy policy) {
  MatchResult result;
  result.truth_count = truth.size();

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<double> thresholds(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) thresholds[k] = match_threshold(truth[k], policy);
  std::vector<bool> matched(truth.size(), false);

  result.detections.reserve(detections.size());
  for (auto j : order) {
    MatchedDetection out;
    out.input_index = j;
    out.score = detections[j].score;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (matched[k]) continue;
      const double o = iou(truth[k], detections[j].box);
      if (o >= thresholds[k] && o > best_iou) {
        best_iou = o;
        out.truth_index = k;
      }
    }
    if (out.truth_index) {
      matched[*out.truth_index] = true;
      out.true_positive = true;
    }
    result.detections.push_back(out);
  }
  return result;
}

PrCurve pr_curve_sorted(std::span<const WeightedOutcome> outcomes, std::uint64_t total_truth) {
  PrCurve curve;
  curve.total_truth = total_truth;
  std::uint64_t tp = 0;
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (o.weight == 0) continue;
    count += o.weight;
    if (o.true_positive) tp += o.weight;
    // Emit a point once every outcome at this score has been absorbed.
    bool last_at_score = true;
    for (std::size_t k = i + 1; k < outcomes.size(); ++k) {
      if (outcomes[k].weight == 0) continue;
      last_at_score = outcomes[k].score != o.score;
      break;
    }
    if (last_at_score) {
      const double recall = total_truth ? static_cast<double>(tp) / total_truth : 0.0;
      curve.points.push_back({o.score, recall, static_cast<double>(tp) / count});
    }
  }
  curve.detections = count;
  curve.true_positives = tp;
  return curve;
}

PrCurve pr_curve(std::span<const MatchResult> per_image) {
  std::vector<WeightedOutcome> outcomes;
  std::uint64_t total_truth = 0;
  for (const auto& m : per_image) {
    total_truth += m.truth_count;
    for (const auto& d : m.detections) outcomes.push_back({d.score, d.true_positive, 1});
  }
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return pr_curve_sorted(outcomes, total_truth);
}

double average_precision(const PrCurve& curve) {
  if (curve.total_truth == 0 || curve.points.empty()) return 0.0;
  const auto& pts = curve.points;
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return ap;
}

DetectionReport evaluate_detection(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                   const DetectionOptions& options, DetectionCache* cache) {
  if (sub.task != Task::kDetection) {
    throw Error(ErrorCode::kInvalidArgument, "submission is not a detection submission");
  }
  // Every (image, category) with truth or detections, minus blacklisted pairs.
  std::set<ImageCategory> keys;
  for (const auto& [key, _] : truth.boxes) keys.insert(key);
  for (const auto& [key, _] : sub.detections) {
    if (truth.images.find(key.first) == truth.images.end()) {
      throw Error(ErrorCode::kNotFound, "detection on unknown image '" + key.first + "'");
    }
    if (!truth.categories.count(key.second)) {
      throw Error(ErrorCode::kNotFound, "detection of unknown category '" + key.second + "'");
    }
    keys.insert(key);
  }
  std::vector<ImageCategory> work;
  for (const auto& key : keys) {
    if (truth.blacklisted_pairs.count(key) || truth.blacklisted_images.count(key.first)) continue;
    work.push_back(key);
  }

  std::vector<MatchResult> matches(work.size());
  static const std::vector<BoundingBox> kNoBoxes;
  static const std::vector<ScoredBox> kNoDetections;
  parallel_for(work.size(), options.threads, [&](std::size_t i) {
    auto t = truth.boxes.find(work[i]);
    auto d = sub.detections.find(work[i]);
    const auto& tb = t == truth.boxes.end() ? kNoBoxes : t->second;
    const auto& db = d == sub.detections.end() ? kNoDetections : d->second;
    matches[i] = match_detections(db, tb, options.policy);
  });

  std::map<CategoryId, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < work.size(); ++i) by_category[work[i].second].push_back(i);

  std::map<ImageId, std::uint32_t> image_index;
  if (cache != nullptr) {
    cache->images = truth.image_order();
    cache->per_category.clear();
    for (std::uint32_t i = 0; i < cache->images.size(); ++i) image_index[cache->images[i]] = i;
  }

  DetectionReport report;
  report.team = sub.team;
  double ap_sum = 0.0;
  for (const auto& cat : truth.categories) {
    CategoryDetection detail;
    std::vector<MatchResult> per_image;
    auto it = by_category.find(cat);
    if (it != by_category.end()) {
      for (auto i : it->second) {
        per_image.push_back(matches[i]);
        if (cache != nullptr) {
          CachedImage entry;
          entry.image = image_index.at(work[i].first);
          entry.truth_count = static_cast<std::uint32_t>(matches[i].truth_count);
          for (const auto& d : matches[i].detections) {
            entry.outcomes.emplace_back(d.score, d.true_positive);
          }
          cache->per_category[cat].push_back(std::move(entry));
        }
      }
    }
    const PrCurve curve = pr_curve(per_image);
    detail.truth = curve.total_truth;
    detail.detections = curve.detections;
    detail.true_positives = curve.true_positives;
    if (curve.total_truth == 0) {
      report.excluded_categories.push_back(cat);
    } else {
      detail.ap = average_precision(curve);
      report.ap_per_category[cat] = *detail.ap;
      ap_sum += *detail.ap;
    }
    if (options.include_curves) detail.curve = curve;
    report.categories.emplace(cat, std::move(detail));
  }
  report.mean_ap = report.ap_per_category.empty() ? 0.0 : ap_sum / report.ap_per_category.size();
  return report;
}

std::optional<double> mean_ap_weighted(const DetectionCache& cache,
                                       std::span<const std::uint32_t> weights) {
  if (weights.size() != cache.images.size()) {
    throw Error(ErrorCode::kInvalidArgument, "weight vector does not match cached image count");
  }
  double sum = 0.0;
  std::size_t counted = 0;
  std::vector<WeightedOutcome> outcomes;
  for (const auto& [cat, entries] : cache.per_category) {
    outcomes.clear();
    std::uint64_t total_truth = 0;
    for (const auto& e : entries) {
      const auto w = weights[e.image];
      if (w == 0) continue;
      total_truth += static_cast<std::uint64_t>(w) * e.truth_count;
      for (const auto& [score, tp] : e.outcomes) outcomes.push_back({score, tp, w});
    }
    if (total_truth == 0) continue;
    std::sort(outcomes.begin(), outcomes.end(),
              [](const auto& a, const auto& b) { return a.score > b.score; });
    sum += average_precision(pr_curve_sorted(outcomes, total_truth));
    ++counted;
  }
  if (counted == 0) return std::nullopt;
  return sum / counted;
}

TeamRanking rank_teams(std::span<const DetectionReport> reports) {
  TeamRanking ranking;
  if (reports.empty()) return ranking;
  std::set<CategoryId> shared;
  std::set<CategoryId> all;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const auto& rep = reports[r];
    if (ranking.mean_ap.count(rep.team)) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate team '" + rep.team + "' in ranking");
    }
    ranking.mean_ap[rep.team] = rep.mean_ap;
    ranking.categories_won[rep.team] = 0;
    std::set<CategoryId> cats;
    for (const auto& [c, _] : rep.ap_per_category) cats.insert(c);
    all.insert(cats.begin(), cats.end());
    if (r == 0) {
      shared = cats;
    } else {
      std::set<CategoryId> keep;
      std::set_intersection(shared.begin(), shared.end(), cats.begin(), cats.end(),
                            std::inserter(keep, keep.end()));
      shared.swap(keep);
    }
  }
  if (shared.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "submissions share no scored category");
  }
  for (const auto& cat : all) {
    double best = -1.0;
    std::vector<std::string> winners;
    for (const auto& rep : reports) {
      auto it = rep.ap_per_category.find(cat);
      if (it == rep.ap_per_category.end()) continue;
      if (it->second > best) {
        best = it->second;
        winners = {rep.team};
      } else if (it->second == best) {
        winners.push_back(rep.team);
      }
    }
    std::sort(winners.begin(), winners.end());
    for (const auto& t : winners) ++ranking.categories_won[t];
    ranking.winners[cat] = std::move(winners);
  }
  for (const auto& [team, _] : ranking.mean_ap) ranking.order.push_back(team);
  std::sort(ranking.order.begin(), ranking.order.end(), [&](const auto& a, const auto& b) {
    const int wa = ranking.categories_won.at(a);
    const int wb = ranking.categories_won.at(b);
    if (wa != wb) return wa > wb;
    const double ma = ranking.mean_ap.at(a);
    const double mb = ranking.mean_ap.at(b);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  return ranking;
}

}  // namespace vrc
