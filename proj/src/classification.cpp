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

#include "vrc/classification.hpp"

#include <algorithm>
#include <climits>

namespace vrc {
namespace {

void check_k(int k) {
  if (k < 1 || k > static_cast<int>(kMaxGuessesPerImage)) {
    throw Error(ErrorCode::kInvalidArgument, "k must be in 1..5");
  }
}

const std::vector<CategoryId>& guesses_for(const SubmissionRecord& sub, const ImageId& id) {
  auto it = sub.labels.find(id);
  if (it == sub.labels.end()) {
    throw Error(ErrorCode::kNotFound, "submission has no predictions for image '" + id + "'");
  }
  return it->second;
}

template <typename Fn>
void for_each_evaluated(const GroundTruthStore& truth, const ClassificationOptions& options,
                        Fn&& fn) {
  for (const auto& [id, label] : truth.labels) {
    if (options.exclude_blacklisted && truth.blacklisted_images.count(id)) continue;
    fn(id, label);
  }
}

}  // namespace

TopKResult top_k_error(const GroundTruthStore& truth, const SubmissionRecord& sub, int k,
                       const ClassificationOptions& options) {
  check_k(k);
  TopKResult result;
  result.k = k;
  std::size_t misses = 0;
  for_each_evaluated(truth, options, [&](const ImageId& id, const CategoryId& label) {
    const auto& guesses = guesses_for(sub, id);
    const auto end = guesses.begin() + std::min<std::ptrdiff_t>(k, guesses.size());
    const int d = std::find(guesses.begin(), end, label) == end ? 1 : 0;
    result.per_image.emplace(id, d);
    misses += d;
  });
  result.evaluated = result.per_image.size();
  result.error = result.evaluated ? static_cast<double>(misses) / result.evaluated : 0.0;
  return result;
}

HierarchicalResult hierarchical_error(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                      const SynsetGraph& graph, int k,
                                      const ClassificationOptions& options) {
  check_k(k);
  HierarchicalResult result;
  result.k = k;
  long long total = 0;
  for_each_evaluated(truth, options, [&](const ImageId& id, const CategoryId& label) {
    const auto& guesses = guesses_for(sub, id);
    const auto n = std::min<std::size_t>(k, guesses.size());
    const bool truth_leaf = graph.is_leaf(label);
    int best = INT_MAX;
    for (std::size_t j = 0; j < n; ++j) {
      if (!truth_leaf || !graph.is_leaf(guesses[j])) ++result.non_leaf_comparisons;
      if (const auto c = graph.common_ancestor_cost(guesses[j], label)) best = std::min(best, *c);
    }
    if (best == INT_MAX) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image '" + id + "': no guess shares an ancestor with '" + label + "'");
    }
    result.per_image.emplace(id, best);
    total += best;
  });
  result.evaluated = result.per_image.size();
  result.error = result.evaluated ? static_cast<double>(total) / result.evaluated : 0.0;
  return result;
}

ClassificationReport evaluate_classification(const GroundTruthStore& truth,
                                             const SubmissionRecord& sub,
                                             const SynsetGraph* graph,
                                             const ClassificationOptions& options) {
  ClassificationReport report;
  report.team = sub.team;
  const auto top1 = top_k_error(truth, sub, 1, options);
  auto top5 = top_k_error(truth, sub, 5, options);
  report.top1_error = top1.error;
  report.top5_error = top5.error;
  report.evaluated = top5.evaluated;

  std::map<CategoryId, std::pair<std::size_t, std::size_t>> per_class;  // misses, count
  for (const auto& [id, d] : top5.per_image) {
    auto& acc = per_class[truth.labels.at(id)];
    acc.first += d;
    acc.second += 1;
  }
  for (const auto& [cat, acc] : per_class) {
    report.per_class_top5_error[cat] = static_cast<double>(acc.first) / acc.second;
  }
  report.per_image_top5 = std::move(top5.per_image);
  if (graph != nullptr) report.hierarchical = hierarchical_error(truth, sub, *graph, 5, options);
  return report;
}

}  // namespace vrc
