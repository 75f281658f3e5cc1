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

#include "vrc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vrc {

bool are_neighbors(const BoundingBox& a, const BoundingBox& b, double gap) noexcept {
  const double gap_x = std::max(a.xmin, b.xmin) - std::min(a.xmax, b.xmax);
  const double gap_y = std::max(a.ymin, b.ymin) - std::min(a.ymax, b.ymax);
  return gap_x < gap && gap_y < gap;
}

std::optional<ClassStats> class_scale_and_instances(const GroundTruthStore& truth,
                                                    const CategoryId& category,
                                                    double neighbor_gap) {
  ClassStats stats;
  stats.category = category;
  double scale_sum = 0.0;
  std::size_t neighbor_sum = 0;
  for (const auto& [key, boxes] : truth.boxes) {
    if (key.second != category || boxes.empty()) continue;
    const auto& image = truth.images.at(key.first);
    ++stats.positive_images;
    stats.instances += boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      scale_sum += box_area_fraction(boxes[i], image);
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (i != j && are_neighbors(boxes[i], boxes[j], neighbor_gap)) ++neighbor_sum;
      }
    }
  }
  if (stats.instances == 0) return std::nullopt;
  stats.avg_scale = scale_sum / stats.instances;
  stats.instances_per_positive_image =
      static_cast<double>(stats.instances) / stats.positive_images;
  stats.neighbors_per_instance = static_cast<double>(neighbor_sum) / stats.instances;
  return stats;
}

std::optional<double> cpl(std::span<const BoundingBox> unit_boxes) {
  const std::size_t n = unit_boxes.size();
  if (n < 2) return std::nullopt;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (iou(unit_boxes[i], unit_boxes[j]) >= 0.5) hits += 2;  // IOU is symmetric
    }
  }
  return static_cast<double>(hits) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

std::vector<BoundingBox> normalized_instances(const GroundTruthStore& truth,
                                              const CategoryId& category) {
  std::vector<BoundingBox> out;
  for (const auto& [key, boxes] : truth.boxes) {
    if (key.second != category) continue;
    const auto& image = truth.images.at(key.first);
    for (const auto& b : boxes) out.push_back(normalize_to_unit(b, image));
  }
  return out;
}

int first_localizing_window(std::span<const RankedWindow> windows,
                            std::span<const BoundingBox> instances) {
  int best = kObjNotFound;
  for (const auto& w : windows) {
    if (w.rank >= best) continue;
    for (const auto& b : instances) {
      if (iou(w.box, b) >= 0.5) {
        best = w.rank;
        break;
      }
    }
  }
  return best;
}

ClutterResult clutter(const GroundTruthStore& truth, const CategoryId& category,
                      const WindowRankings& windows) {
  ClutterResult result;
  double sum = 0.0;
  for (const auto& [key, boxes] : truth.boxes) {
    if (key.second != category || boxes.empty()) continue;
    auto it = windows.find(key.first);
    int obj = kObjNotFound;
    if (it == windows.end() || it->second.empty()) {
      ++result.images_without_windows;
    } else {
      obj = first_localizing_window(it->second, boxes);
    }
    result.obj[key.first] = obj;
    sum += obj;
  }
  if (result.obj.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "category '" + category + "' has no instances");
  }
  result.clutter = std::log2(sum / static_cast<double>(result.obj.size()));
  return result;
}

DatasetStats dataset_stats(const GroundTruthStore& truth, const DatasetStatsOptions& options) {
  DatasetStats out;
  std::vector<double> scale, inst, neigh, cpls, clutters;
  for (const auto& cat : truth.categories) {
    auto stats = class_scale_and_instances(truth, cat, options.neighbor_gap);
    if (!stats) {
      out.excluded.push_back(cat);
      continue;
    }
    const auto boxes = normalized_instances(truth, cat);
    stats->cpl = cpl(boxes);
    if (options.windows != nullptr) {
      const auto c = clutter(truth, cat, *options.windows);
      stats->clutter = c.clutter;
      stats->images_without_windows = c.images_without_windows;
      clutters.push_back(c.clutter);
    }
    scale.push_back(stats->avg_scale);
    inst.push_back(stats->instances_per_positive_image);
    neigh.push_back(stats->neighbors_per_instance);
    if (stats->cpl) cpls.push_back(*stats->cpl);
    out.classes.push_back(std::move(*stats));
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  };
  out.mean_avg_scale = mean(scale);
  out.mean_instances_per_positive_image = mean(inst);
  out.mean_neighbors_per_instance = mean(neigh);
  if (!cpls.empty()) out.mean_cpl = mean(cpls);
  if (!clutters.empty()) out.mean_clutter = mean(clutters);
  return out;
}

std::map<CategoryId, double> optimistic_per_class(
    std::span<const std::map<CategoryId, double>> entries) {
  std::map<CategoryId, double> best;
  for (const auto& entry : entries) {
    for (const auto& [cat, score] : entry) {
      auto [it, inserted] = best.emplace(cat, score);
      if (!inserted) it->second = std::max(it->second, score);
    }
  }
  return best;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kInvalidArgument, "pearson: sample sizes differ");
  }
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScaleCorrelation scale_accuracy_correlation(const std::map<CategoryId, double>& avg_scale,
                                            const std::map<CategoryId, double>& scores) {
  std::vector<double> x, y;
  for (const auto& [cat, s] : avg_scale) {
    auto it = scores.find(cat);
    if (it == scores.end()) continue;
    x.push_back(s);
    y.push_back(it->second);
  }
  return {pearson(x, y), x.size()};
}

ScaleNormalization normalize_scale_groups(const std::vector<std::vector<double>>& scales,
                                          double tol) {
  ScaleNormalization out;
  const std::size_t bins = scales.size();
  out.retained.resize(bins);
  out.emptied.assign(bins, false);
  std::vector<double> sums(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    out.retained[b].resize(scales[b].size());
    std::iota(out.retained[b].begin(), out.retained[b].end(), 0);
    sums[b] = std::accumulate(scales[b].begin(), scales[b].end(), 0.0);
  }
  for (;;) {
    std::size_t hi = bins;
    std::size_t lo = bins;
    double hi_mean = 0, lo_mean = 0;
    for (std::size_t b = 0; b < bins; ++b) {
      if (out.retained[b].empty()) continue;
      const double m = sums[b] / out.retained[b].size();
      if (hi == bins || m > hi_mean) {
        hi = b;
        hi_mean = m;
      }
      if (lo == bins || m < lo_mean) {
        lo = b;
        lo_mean = m;
      }
    }
    if (hi == bins || hi == lo || hi_mean - lo_mean <= tol) break;
    auto& items = out.retained[hi];
    auto largest = items.begin();
    for (auto it = items.begin(); it != items.end(); ++it) {
      if (scales[hi][*it] > scales[hi][*largest]) largest = it;
    }
    out.discarded.emplace_back(hi, *largest);
    sums[hi] -= scales[hi][*largest];
    items.erase(largest);
    if (items.empty()) {
      out.emptied[hi] = true;
      sums[hi] = 0.0;
    }
  }
  return out;
}

namespace {

double scale_of(const std::map<CategoryId, double>& avg_scale, const CategoryId& cat) {
  auto it = avg_scale.find(cat);
  if (it == avg_scale.end()) {
    throw Error(ErrorCode::kInvalidArgument, "no object scale for category '" + cat + "'");
  }
  return it->second;
}

}  // namespace

PropertyBins normalize_bins_by_scale(const std::string& property,
                                     const std::map<CategoryId, int>& assignment,
                                     const std::map<CategoryId, double>& avg_scale, double tol,
                                     std::size_t min_classes) {
  PropertyBins out;
  out.property = property;
  out.assignment = assignment;
  out.tol = tol;
  std::map<int, std::vector<CategoryId>> grouped;
  for (const auto& [cat, bin] : assignment) grouped[bin].push_back(cat);

  std::vector<std::vector<double>> scales;
  for (const auto& [bin, cats] : grouped) {
    BinSummary summary;
    summary.bin = bin;
    summary.assigned = cats;
    std::vector<double> s;
    for (const auto& c : cats) s.push_back(scale_of(avg_scale, c));
    scales.push_back(std::move(s));
    out.bins.push_back(std::move(summary));
  }
  const auto norm = normalize_scale_groups(scales, tol);
  for (const auto& [b, item] : norm.discarded) {
    out.discarded.emplace_back(out.bins[b].bin, out.bins[b].assigned[item]);
  }
  for (std::size_t b = 0; b < out.bins.size(); ++b) {
    auto& summary = out.bins[b];
    summary.emptied = norm.emptied[b];
    double sum = 0.0;
    for (auto item : norm.retained[b]) {
      summary.retained.push_back(summary.assigned[item]);
      sum += scales[b][item];
    }
    if (!summary.retained.empty()) summary.mean_scale = sum / summary.retained.size();
    summary.reported = summary.retained.size() >= std::max<std::size_t>(min_classes, 1);
  }
  return out;
}

void bin_score_ci(PropertyBins& bins, const std::map<CategoryId, double>& avg_scale,
                  const std::map<CategoryId, double>& scores, const BootstrapConfig& cfg) {
  auto score_of = [&](const CategoryId& cat) {
    auto it = scores.find(cat);
    if (it == scores.end()) {
      throw Error(ErrorCode::kInvalidArgument, "no score for category '" + cat + "'");
    }
    return it->second;
  };
  std::vector<std::size_t> sizes;
  std::vector<std::vector<double>> item_scale;
  std::vector<std::vector<double>> item_score;
  for (const auto& summary : bins.bins) {
    sizes.push_back(summary.assigned.size());
    std::vector<double> sc, sv;
    for (const auto& c : summary.assigned) {
      sc.push_back(scale_of(avg_scale, c));
      sv.push_back(score_of(c));
    }
    item_scale.push_back(std::move(sc));
    item_score.push_back(std::move(sv));
  }

  for (std::size_t b = 0; b < bins.bins.size(); ++b) {
    auto& summary = bins.bins[b];
    if (summary.retained.empty()) continue;
    double sum = 0.0;
    for (const auto& c : summary.retained) sum += score_of(c);
    summary.score = sum / summary.retained.size();
    summary.degenerate_ci = summary.assigned.size() == 1;

    auto statistic = [&, b](std::span<const std::uint32_t> counts) -> std::optional<double> {
      std::vector<std::vector<double>> scales(sizes.size());
      std::vector<double> bin_scores;
      std::size_t offset = 0;
      for (std::size_t g = 0; g < sizes.size(); ++g) {
        for (std::size_t i = 0; i < sizes[g]; ++i) {
          for (std::uint32_t m = 0; m < counts[offset + i]; ++m) {
            scales[g].push_back(item_scale[g][i]);
            if (g == b) bin_scores.push_back(item_score[g][i]);
          }
        }
        offset += sizes[g];
      }
      const auto norm = normalize_scale_groups(scales, bins.tol);
      if (norm.retained[b].empty()) return std::nullopt;
      double s = 0.0;
      for (auto item : norm.retained[b]) s += bin_scores[item];
      return s / norm.retained[b].size();
    };
    summary.ci = bootstrap_statistic(sizes, *summary.score, statistic, cfg);
  }
}

std::map<CategoryId, int> derive_bins_from_descendants(const SynsetGraph& graph,
                                                       const std::map<CategoryId, int>& annotated,
                                                       std::span<const CategoryId> targets) {
  std::map<CategoryId, int> out;
  for (const auto& target : targets) {
    long long sum = 0;
    long long count = 0;
    for (const auto& d : graph.descendants_inclusive(target)) {
      auto it = annotated.find(d);
      if (it == annotated.end()) continue;
      sum += it->second;
      ++count;
    }
    if (count == 0) continue;
    // floor(sum / count + 1/2) without floating point.
    out[target] = static_cast<int>((2 * sum + count) / (2 * count));
  }
  return out;
}

}  // namespace vrc
