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
#include <optional>

#include "vrc/hierarchy.hpp"
#include "vrc/ingest.hpp"

namespace vrc {

struct ClassificationOptions {
  // Exclude blacklisted images from N. Off by default for classification.
  bool exclude_blacklisted = false;
};

// Flat top-k error: per image 0 if the truth label is among the first k
// guesses, else 1; error is the mean over evaluated images.
struct TopKResult {
  int k = 5;
  double error = 0;
  std::map<ImageId, int> per_image;
  std::size_t evaluated = 0;
};

// Hierarchical error: per image, the minimum hierarchical cost over the
// first k guesses; error is the mean cost.
struct HierarchicalResult {
  int k = 5;
  double error = 0;
  std::map<ImageId, int> per_image;
  std::size_t evaluated = 0;
  // Comparisons where either side was not a leaf of the graph. Permitted,
  // but reported.
  std::size_t non_leaf_comparisons = 0;
};

struct ClassificationReport {
  std::string team;
  double top1_error = 0;
  double top5_error = 0;
  std::map<ImageId, int> per_image_top5;
  std::map<CategoryId, double> per_class_top5_error;
  std::optional<HierarchicalResult> hierarchical;  // k = 5
  std::size_t evaluated = 0;
};

// Throws kInvalidArgument when k is outside 1..5 and kNotFound when the
// submission lacks an evaluated image.
TopKResult top_k_error(const GroundTruthStore& truth, const SubmissionRecord& sub, int k,
                       const ClassificationOptions& options = {});

// Throws kNotFound when a truth or predicted label is not a graph node.
HierarchicalResult hierarchical_error(const GroundTruthStore& truth, const SubmissionRecord& sub,
                                      const SynsetGraph& graph, int k,
                                      const ClassificationOptions& options = {});

ClassificationReport evaluate_classification(const GroundTruthStore& truth,
                                             const SubmissionRecord& sub,
                                             const SynsetGraph* graph = nullptr,
                                             const ClassificationOptions& options = {});

}  // namespace vrc
