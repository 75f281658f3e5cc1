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

#include "vrc/localization.hpp"

#include <algorithm>

namespace vrc {

LocalizationReport localization_error(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                      double iou_threshold) {
  LocalizationReport report;
  report.team = sub.team;
  report.iou_threshold = iou_threshold;
  std::size_t misses = 0;
  std::map<CategoryId, std::pair<std::size_t, std::size_t>> per_class;

  for (const auto& [id, label] : truth.labels) {
    if (truth.blacklisted_images.count(id)) {
      ++report.blacklisted;
      continue;
    }
    auto boxes_it = truth.boxes.find({id, label});
    if (boxes_it == truth.boxes.end() || boxes_it->second.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "image '" + id + "' has no truth boxes for its label '" + label + "'");
    }
    auto sub_it = sub.localizations.find(id);
    if (sub_it == sub.localizations.end()) {
      throw Error(ErrorCode::kNotFound, "submission has no predictions for image '" + id + "'");
    }
    const auto& instances = boxes_it->second;

    int image_score = 1;
    for (const auto& guess : sub_it->second) {
      const int label_miss = guess.label == label ? 0 : 1;
      const int box_miss =
          std::any_of(instances.begin(), instances.end(),
                      [&](const BoundingBox& b) { return iou(guess.box, b) > iou_threshold; })
              ? 0
              : 1;
      image_score = std::min(image_score, std::max(label_miss, box_miss));
    }
    report.per_image.emplace(id, image_score);
    misses += image_score;
    auto& acc = per_class[label];
    acc.first += image_score;
    acc.second += 1;
  }
  report.evaluated = report.per_image.size();
  report.top5_error = report.evaluated ? static_cast<double>(misses) / report.evaluated : 0.0;
  for (const auto& [cat, acc] : per_class) {
    report.per_class_error[cat] = static_cast<double>(acc.first) / acc.second;
  }
  return report;
}

}  // namespace vrc
