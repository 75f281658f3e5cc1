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

// Object detection scoring.
//
// Detections of one category on one image are matched greedily to the truth
// instances in descending score order. A truth box B is a candidate for a
// detection b when it is still unmatched and IOU(B, b) >= thr(B); the
// candidate with the largest IOU is taken. The adaptive threshold
//
//   thr(B) = min(0.5, w*h / ((w + 10) * (h + 10)))
//
// tolerates roughly 5 pixels of slack per side on small objects. Precision
// and recall are then accumulated over all images of a category and average
// precision is the area under the precision envelope.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrc/ingest.hpp"

namespace vrc {

enum class ThresholdPolicy {
  kAdaptive,   // thr(B) as above
  kFixedHalf,  // PASCAL-style constant 0.5
};

double adaptive_threshold(const BoundingBox& truth_box) noexcept;
double match_threshold(const BoundingBox& truth_box, ThresholdPolicy policy) noexcept;

struct MatchedDetection {
  std::size_t input_index = 0;  // position in the input span
  double score = 0;
  bool true_positive = false;
  std::optional<std::size_t> truth_index;

  bool operator==(const MatchedDetection&) const = default;
};

// Detections in processing order: descending score, ties in input order.
struct MatchResult {
  std::vector<MatchedDetection> detections;
  std::size_t truth_count = 0;

  std::size_t true_positives() const;
  bool operator==(const MatchResult&) const = default;
};

// Matching for a single (image, category). IOU ties between candidate truth
// boxes go to the lowest truth index.
MatchResult match_detections(std::span<const ScoredBox> detections,
                             std::span<const BoundingBox> truth,
                             ThresholdPolicy policy = ThresholdPolicy::kAdaptive);

struct PrPoint {
  double threshold = 0;
  double recall = 0;
  double precision = 0;
};

// One point per distinct detection score, in descending score order.
struct PrCurve {
  std::vector<PrPoint> points;
  std::uint64_t total_truth = 0;
  std::uint64_t detections = 0;
  std::uint64_t true_positives = 0;
};

// A scored outcome with an image multiplicity. Used to accumulate PR curves
// over weighted image samples.
struct WeightedOutcome {
  double score = 0;
  bool true_positive = false;
  std::uint32_t weight = 1;
};

PrCurve pr_curve(std::span<const MatchResult> per_image);

// `outcomes` must be sorted by descending score. Zero-weight outcomes are
// ignored.
PrCurve pr_curve_sorted(std::span<const WeightedOutcome> outcomes, std::uint64_t total_truth);

// All-points interpolated AP: sum over recall steps of (r_i - r_{i-1}) times
// the maximum precision at recall >= r_i. Returns 0 when total_truth is 0.
double average_precision(const PrCurve& curve);

// Per-image match outcomes for one category, kept so that mAP can be
// recomputed over resampled image sets without re-matching.
struct CachedImage {
  std::uint32_t image = 0;  // index into DetectionCache::images
  std::uint32_t truth_count = 0;
  std::vector<std::pair<double, bool>> outcomes;  // (score, true positive)
};

struct DetectionCache {
  std::vector<ImageId> images;
  std::map<CategoryId, std::vector<CachedImage>> per_category;
};

struct DetectionOptions {
  ThresholdPolicy policy = ThresholdPolicy::kAdaptive;
  bool include_curves = false;
  unsigned threads = 1;
};

struct CategoryDetection {
  std::uint64_t truth = 0;
  std::uint64_t detections = 0;
  std::uint64_t true_positives = 0;
  std::optional<double> ap;  // empty when the category has no truth instances
  std::optional<PrCurve> curve;
};

struct DetectionReport {
  std::string team;
  std::map<CategoryId, double> ap_per_category;  // categories with truth only
  double mean_ap = 0;
  // Categories with zero truth instances, excluded from mAP.
  std::vector<CategoryId> excluded_categories;
  std::map<CategoryId, CategoryDetection> categories;
};

DetectionReport evaluate_detection(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                   const DetectionOptions& options = {},
                                   DetectionCache* cache = nullptr);

// mAP over whatever categories have truth instances in the cache, with image
// i counted weights[i] times. Returns nullopt when no category has truth.
std::optional<double> mean_ap_weighted(const DetectionCache& cache,
                                       std::span<const std::uint32_t> weights);

struct TeamRanking {
  // Teams with the highest AP per category; ties credit every tied team.
  std::map<CategoryId, std::vector<std::string>> winners;
  std::map<std::string, int> categories_won;
  std::map<std::string, double> mean_ap;
  // Most categories won first, then higher mAP, then team name.
  std::vector<std::string> order;
};

// Throws kInvalidArgument for duplicate team names or when the reports share
// no category.
TeamRanking rank_teams(std::span<const DetectionReport> reports);

}  // namespace vrc
