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

// Parsers and writers for every on-disk format. This is the only module that
// touches external bytes. All parsers are strict: a failure is reported as
// vrc::Error with code kParse and the 1-based line number of the offending
// line.
//
// Text conventions shared by all formats: UTF-8, LF line endings (a trailing
// CR is tolerated), fields separated by spaces or tabs, blank lines and lines
// starting with '#' are skipped except in the submission formats where every
// line is significant. Writers emit canonical output: sorted by image id and
// shortest round-trip decimal floats.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vrc/core.hpp"
#include "vrc/hierarchy.hpp"

namespace vrc {

using ImageCategory = std::pair<ImageId, CategoryId>;

// Server-side truth for one task.
struct GroundTruthStore {
  Task task = Task::kClassification;
  std::map<ImageId, ImageRef> images;  // sorted by id; submission lines follow this order
  std::set<CategoryId> categories;
  std::map<ImageId, CategoryId> labels;  // classification / localization
  std::map<ImageCategory, std::vector<BoundingBox>> boxes;
  std::set<ImageId> blacklisted_images;
  std::set<ImageCategory> blacklisted_pairs;

  std::vector<ImageId> image_order() const;
  std::set<ImageId> image_ids() const;
  bool operator==(const GroundTruthStore&) const = default;
};

struct LocalizationGuess {
  CategoryId label;
  BoundingBox box;
  bool operator==(const LocalizationGuess&) const = default;
};

inline constexpr std::size_t kMaxGuessesPerImage = 5;

// A team's parsed predictions for one task. Exactly one of the three maps is
// populated, according to `task`.
struct SubmissionRecord {
  std::string team;
  Task task = Task::kClassification;
  std::map<ImageId, std::vector<CategoryId>> labels;
  std::map<ImageId, std::vector<LocalizationGuess>> localizations;
  // Detections grouped by (image, category), in file order within a group.
  std::map<ImageCategory, std::vector<ScoredBox>> detections;

  std::size_t detection_count() const;
  bool operator==(const SubmissionRecord&) const = default;
};

// Classification: one line per image in ascending image id order, 1..5 category ids.
SubmissionRecord parse_classification_submission(std::string_view bytes,
                                                 const std::set<CategoryId>& categories,
                                                 const std::vector<ImageId>& image_order);

// Localization: one line per image, 1..5 groups of `cat xmin ymin xmax ymax`.
SubmissionRecord parse_localization_submission(std::string_view bytes,
                                               const std::set<CategoryId>& categories,
                                               const std::vector<ImageId>& image_order);

// Detection: one detection per line, `image_id category_id score xmin ymin xmax ymax`.
SubmissionRecord parse_detection_submission(std::string_view bytes,
                                            const std::set<CategoryId>& categories,
                                            const std::set<ImageId>& images);

// Dispatches on `task` using the id sets of `truth`.
SubmissionRecord parse_submission(Task task, std::string_view bytes, const GroundTruthStore& truth,
                                  std::string team = {});

std::string write_classification_submission(const SubmissionRecord& sub,
                                            const std::vector<ImageId>& image_order);
std::string write_localization_submission(const SubmissionRecord& sub,
                                          const std::vector<ImageId>& image_order);
std::string write_detection_submission(const SubmissionRecord& sub);

// Contents of a ground-truth directory, one string per file:
//   task            `classification` | `localization` | `detection`
//   images.tsv      `image_id width height`
//   categories.txt  `category_id`
//   labels.tsv      `image_id category_id` (classification, localization)
//   boxes.tsv       `image_id category_id xmin ymin xmax ymax`
//   blacklist.tsv   `image_id` or `image_id category_id` (optional)
struct GroundTruthFiles {
  std::string task;
  std::string images;
  std::string categories;
  std::string labels;
  std::string boxes;
  std::string blacklist;
};

GroundTruthStore parse_ground_truth(const GroundTruthFiles& files);
GroundTruthFiles write_ground_truth(const GroundTruthStore& store);
GroundTruthStore load_ground_truth(const std::filesystem::path& dir);
void save_ground_truth(const GroundTruthStore& store, const std::filesystem::path& dir);

// Hierarchy: `parent_id<TAB>child_id` per line plus an optional leaf
// manifest with one category id per line.
SynsetGraph parse_hierarchy(std::string_view edges, std::string_view leaf_manifest = {});
std::pair<std::string, std::string> write_hierarchy(const SynsetGraph& graph);

// Question tree records, one per line:
//   Q<TAB>query_id                    declares a query (needed for isolated roots)
//   E<TAB>parent_query<TAB>child_query
//   B<TAB>leaf_query<TAB>category_id
struct QuestionTreeSpec {
  std::vector<std::string> queries;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::pair<std::string, CategoryId>> bindings;
};
QuestionTreeSpec parse_question_tree(std::string_view bytes);
std::string write_question_tree(const QuestionTreeSpec& spec);

// Objectness window rankings: `image_id rank xmin ymin xmax ymax`, rank in 1..1000.
struct RankedWindow {
  int rank = 0;
  BoundingBox box;
  bool operator==(const RankedWindow&) const = default;
};
using WindowRankings = std::map<ImageId, std::vector<RankedWindow>>;
WindowRankings parse_window_rankings(std::string_view bytes, const std::set<ImageId>& images);
std::string write_window_rankings(const WindowRankings& windows);

// Property annotations: `category<TAB>property<TAB>bin` with a non-negative
// integer bin index.
struct PropertyAnnotation {
  CategoryId category;
  std::string property;
  int bin = 0;
  bool operator==(const PropertyAnnotation&) const = default;
};
std::vector<PropertyAnnotation> parse_property_annotations(std::string_view bytes);

// Consensus confidence table: `yes_votes no_votes posterior`.
std::map<std::pair<int, int>, double> parse_confidence_table(std::string_view bytes);
std::string write_confidence_table(const std::map<std::pair<int, int>, double>& table);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace vrc
