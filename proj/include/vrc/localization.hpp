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

#pragma once

#include <map>

#include "vrc/ingest.hpp"

namespace vrc {

// A guess is correct when its label equals the image's truth label AND its
// box overlaps some truth instance of that label with IOU strictly greater
// than `iou_threshold`. An IOU of exactly the threshold is a miss, unlike
// detection matching which accepts equality.
struct LocalizationReport {
  std::string team;
  double iou_threshold = 0.5;
  double top5_error = 0;
  std::map<ImageId, int> per_image;
  std::map<CategoryId, double> per_class_error;
  std::size_t evaluated = 0;    // images minus blacklisted images
  std::size_t blacklisted = 0;  // blacklisted images skipped
};

// Throws kInvalidArgument when an evaluated image has no truth boxes for its
// label and kNotFound when the submission lacks an evaluated image.
LocalizationReport localization_error(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                      double iou_threshold = 0.5);

}  // namespace vrc
