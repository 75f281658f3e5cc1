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

// Dataset difficulty measures and per-class analysis.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrc/bootstrap.hpp"
#include "vrc/hierarchy.hpp"
#include "vrc/ingest.hpp"

namespace vrc {

struct ClassStats {
  CategoryId category;
  std::size_t instances = 0;
  std::size_t positive_images = 0;
  double avg_scale = 0;  // mean fraction of the image covered per instance
  double instances_per_positive_image = 0;
  double neighbors_per_instance = 0;
  std::optional<double> cpl;      // undefined below two instances
  std::optional<double> clutter;  // only when window rankings are supplied
  std::size_t images_without_windows = 0;
};

// Two same-category instances in one image are neighbors when the gap
// between their boxes is below `gap` on both axes. With the default gap of 0
// this means a strictly positive intersection area.
bool are_neighbors(const BoundingBox& a, const BoundingBox& b, double gap = 0.0) noexcept;

// Scale, instance and neighbor statistics for one category. Returns nullopt
// when the category has no instances.
std::optional<ClassStats> class_scale_and_instances(const GroundTruthStore& truth,
                                                    const CategoryId& category,
                                                    double neighbor_gap = 0.0);

// Chance performance of localization over boxes already mapped to the unit
// square: the fraction of ordered pairs (i, j), i != j, with IOU >= 0.5.
// nullopt when fewer than two boxes are given.
std::optional<double> cpl(std::span<const BoundingBox> unit_boxes);

// Boxes of `category` from every image, each normalized by its own image.
std::vector<BoundingBox> normalized_instances(const GroundTruthStore& truth,
                                              const CategoryId& category);

inline constexpr int kObjNotFound = 1001;

// Rank of the first window overlapping some instance with IOU >= 0.5, or
// 1001 when none of the windows does.
int first_localizing_window(std::span<const RankedWindow> windows,
                            std::span<const BoundingBox> instances);

struct ClutterResult {
  double clutter = 0;  // log2 of the mean obj(m)
  std::map<ImageId, int> obj;
  std::size_t images_without_windows = 0;
};

// Throws kInvalidArgument when the category appears in no image.
ClutterResult clutter(const GroundTruthStore& truth, const CategoryId& category,
                      const WindowRankings& windows);

struct DatasetStatsOptions {
  double neighbor_gap = 0.0;
  const WindowRankings* windows = nullptr;
};

struct DatasetStats {
  std::vector<ClassStats> classes;
  std::vector<CategoryId> excluded;  // categories without instances
  double mean_avg_scale = 0;
  double mean_instances_per_positive_image = 0;
  double mean_neighbors_per_instance = 0;
  std::optional<double> mean_cpl;
  std::optional<double> mean_clutter;
};

DatasetStats dataset_stats(const GroundTruthStore& truth, const DatasetStatsOptions& options = {});

// Per-category best score over all entries.
std::map<CategoryId, double> optimistic_per_class(
    std::span<const std::map<CategoryId, double>> entries);

// nullopt with fewer than 3 pairs or zero variance on either side.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct ScaleCorrelation {
  std::optional<double> rho;
  std::size_t pairs = 0;
};

ScaleCorrelation scale_accuracy_correlation(const std::map<CategoryId, double>& avg_scale,
                                            const std::map<CategoryId, double>& scores);

// Scale normalization of property bins: while the highest and lowest bin mean
// scales differ by more than `tol`, discard the largest-scale item from the
// bin with the highest mean. A bin that empties is dropped. Ties pick the
// lowest bin index and then the earliest item.
struct ScaleNormalization {
  std::vector<std::vector<std::size_t>> retained;  // item indices per bin
  std::vector<std::pair<std::size_t, std::size_t>> discarded;  // (bin, item) in order
  std::vector<bool> emptied;
};
ScaleNormalization normalize_scale_groups(const std::vector<std::vector<double>>& scales,
                                          double tol);

struct BinSummary {
  int bin = 0;
  std::vector<CategoryId> assigned;
  std::vector<CategoryId> retained;
  double mean_scale = 0;  // over retained
  bool emptied = false;   // scale normalization removed every category
  bool reported = false;  // retained at least min_classes categories
  std::optional<double> score;
  std::optional<ConfidenceInterval> ci;
  bool degenerate_ci = false;
};

struct PropertyBins {
  std::string property;
  std::map<CategoryId, int> assignment;
  std::vector<BinSummary> bins;  // ascending bin index
  std::vector<std::pair<int, CategoryId>> discarded;  // discard sequence
  double tol = 0;
};

PropertyBins normalize_bins_by_scale(const std::string& property,
                                     const std::map<CategoryId, int>& assignment,
                                     const std::map<CategoryId, double>& avg_scale, double tol,
                                     std::size_t min_classes = 5);

// Per-bin mean score of retained categories and a class-level bootstrap CI:
// each round resamples the categories of every bin with replacement, re-runs
// scale normalization and averages the scores of what remains.
void bin_score_ci(PropertyBins& bins, const std::map<CategoryId, double>& avg_scale,
                  const std::map<CategoryId, double>& scores, const BootstrapConfig& cfg);

// Bin assignment for `targets` from the annotated bins of their descendants
// (self included): mean bin index rounded half up. Targets without any
// annotated descendant are left out.
std::map<CategoryId, int> derive_bins_from_descendants(const SynsetGraph& graph,
                                                       const std::map<CategoryId, int>& annotated,
                                                       std::span<const CategoryId> targets);

}  // namespace vrc
