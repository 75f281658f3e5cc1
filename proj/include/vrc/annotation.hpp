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

// Annotation planning and crowd-workflow simulation.
//
// Full-image labeling walks a DAG of "is there a ... in the image?" queries.
// Root queries are always asked. A "yes" makes the unanswered children
// candidates; a "no" marks every unanswered descendant "no" without asking.
// Candidates are served first in, first out.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vrc/ingest.hpp"

namespace vrc {

class QuestionTree {
 public:
  // Throws kInvalidArgument on cycles, unbound leaves, bindings of internal
  // queries and categories bound more than once.
  explicit QuestionTree(const QuestionTreeSpec& spec);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::size_t q) const { return ids_.at(q); }
  std::size_t index(const std::string& id) const;
  const std::vector<std::size_t>& children(std::size_t q) const { return children_.at(q); }
  const std::vector<std::size_t>& parents(std::size_t q) const { return parents_.at(q); }
  const std::vector<std::size_t>& descendants(std::size_t q) const { return descendants_.at(q); }
  const std::vector<std::size_t>& roots() const noexcept { return roots_; }
  std::vector<std::size_t> leaves() const;
  // Category bound to a leaf query, nullopt for internal queries.
  const std::optional<CategoryId>& category_of(std::size_t q) const { return category_.at(q); }
  std::size_t leaf_for(const CategoryId& category) const;
  std::vector<CategoryId> categories() const;
  std::size_t category_count() const noexcept { return leaf_of_.size(); }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> descendants_;  // proper descendants, sorted
  std::vector<std::size_t> roots_;
  std::vector<std::optional<CategoryId>> category_;
  std::map<CategoryId, std::size_t> leaf_of_;
};

enum class Answer : std::uint8_t { kUnset = 0, kYes, kNo };

class AnswerOracle {
 public:
  virtual ~AnswerOracle() = default;
  virtual Answer answer(std::size_t query) = 0;
};

// Answers yes exactly when some category bound at or below the query is
// present in the image.
class TruthfulOracle : public AnswerOracle {
 public:
  TruthfulOracle(const QuestionTree& tree, const std::set<CategoryId>& present);
  Answer answer(std::size_t query) override { return truth_[query] ? Answer::kYes : Answer::kNo; }
  bool truth(std::size_t query) const { return truth_[query]; }

 private:
  std::vector<bool> truth_;
};

// Truthful answers flipped independently with probability `flip`.
class NoisyOracle : public AnswerOracle {
 public:
  NoisyOracle(const QuestionTree& tree, const std::set<CategoryId>& present, double flip,
              std::uint64_t seed);
  Answer answer(std::size_t query) override;

 private:
  TruthfulOracle truthful_;
  double flip_;
  std::mt19937_64 rng_;
};

struct QueryLogEntry {
  std::size_t query = 0;
  Answer answer = Answer::kUnset;
  bool asked = true;  // false when the answer came from the initial labels
};

struct LabelState {
  std::vector<Answer> labels;
  std::size_t queries_issued = 0;
  std::vector<QueryLogEntry> log;

  std::set<CategoryId> present_categories(const QuestionTree& tree) const;
};

// `initial` maps query ids to known answers. A known "yes" implies "yes" for
// every ancestor and a known "no" implies "no" for every descendant; known
// answers are never asked. Throws kInvalidArgument when the implied labels
// conflict (a yes below a no).
LabelState plan_and_label(const QuestionTree& tree, AnswerOracle& oracle,
                          const std::map<std::string, Answer>& initial = {});

struct AnnotationCost {
  std::vector<std::size_t> per_image;
  std::size_t total = 0;
  std::size_t naive_total = 0;  // images * categories
  double mean_per_image = 0;
  double ratio_to_naive = 0;
};

AnnotationCost annotation_cost_report(const QuestionTree& tree,
                                      std::span<const std::set<CategoryId>> images);

// Sequential consensus labeling against a table of P(good image | yes, no).
using ConfidenceTable = std::map<std::pair<int, int>, double>;

enum class ConsensusDecision { kAccept, kReject, kNeedMoreVotes, kUndecided };

std::string_view decision_name(ConsensusDecision d);

struct ConsensusOutcome {
  ConsensusDecision decision = ConsensusDecision::kNeedMoreVotes;
  int yes = 0;
  int no = 0;
  double posterior = 0;
  bool fallback_used = false;  // some tally was missing from the table
};

class ConsensusTracker {
 public:
  // Accept when the posterior reaches `threshold`, reject when it falls to
  // 1 - threshold. After `vote_cap` votes without a decision the outcome is
  // kUndecided. Tallies missing from the table use the nearest tally by L1
  // distance (ties to the smaller yes count).
  ConsensusTracker(const ConfidenceTable& table, double threshold, int vote_cap);

  ConsensusOutcome add_vote(bool yes);
  const ConsensusOutcome& outcome() const noexcept { return outcome_; }

 private:
  double lookup(int yes, int no);

  const ConfidenceTable& table_;
  double threshold_;
  int vote_cap_;
  ConsensusOutcome outcome_;
};

ConsensusOutcome consensus_label(std::span<const bool> votes, const ConfidenceTable& table,
                                 double threshold, int vote_cap);

struct SeedImage {
  bool good = false;
  std::vector<bool> votes;
};

// Empirical P(good | tally) over every vote prefix of the seed sample, for
// prefixes of at most `max_votes` votes.
ConfidenceTable estimate_confidence_table(std::span<const SeedImage> seed, int max_votes);

// Bounding-box workflow: draw one box, verify its quality, then verify
// coverage; rejected boxes are redrawn and incomplete coverage asks for
// another box.
class DrawWorker {
 public:
  virtual ~DrawWorker() = default;
  // nullopt when the worker finds nothing left to draw.
  virtual std::optional<BoundingBox> draw(std::span<const BoundingBox> accepted) = 0;
};

class QualityWorker {
 public:
  virtual ~QualityWorker() = default;
  virtual bool accept(const BoundingBox& candidate, std::span<const BoundingBox> accepted) = 0;
};

class CoverageWorker {
 public:
  virtual ~CoverageWorker() = default;
  virtual bool complete(std::span<const BoundingBox> accepted) = 0;
};

enum class WorkflowTask { kDraw, kQuality, kCoverage };

struct WorkflowEvent {
  WorkflowTask task = WorkflowTask::kDraw;
  bool positive = false;  // box drawn / box accepted / coverage complete
  std::optional<BoundingBox> box;
};

struct WorkflowResult {
  std::vector<BoundingBox> boxes;
  std::size_t draw_tasks = 0;
  std::size_t quality_tasks = 0;
  std::size_t coverage_tasks = 0;
  bool budget_exhausted = false;
  std::vector<WorkflowEvent> audit;
};

// `initial` boxes are kept and checked for coverage before anything is
// drawn. `max_tasks` bounds the total number of worker tasks.
WorkflowResult bbox_workflow(DrawWorker& drawer, QualityWorker& quality, CoverageWorker& coverage,
                             std::span<const BoundingBox> initial = {},
                             std::size_t max_tasks = 1000);

// Error rates of simulated workers. Each sub-task errs independently.
struct WorkflowNoise {
  double draw_error = 0;     // P(drawn box is loose: 0.5 <= IOU < accurate_iou)
  double quality_flip = 0;   // P(quality verdict is wrong)
  double coverage_flip = 0;  // P(coverage verdict is wrong)
  double accurate_iou = 0.7;
};

// Simulated workers that know the true instances of the image. With zero
// noise they reproduce the instance set exactly.
class SimulatedWorkers : public DrawWorker, public QualityWorker, public CoverageWorker {
 public:
  SimulatedWorkers(std::vector<BoundingBox> instances, WorkflowNoise noise, std::uint64_t seed);

  std::optional<BoundingBox> draw(std::span<const BoundingBox> accepted) override;
  bool accept(const BoundingBox& candidate, std::span<const BoundingBox> accepted) override;
  bool complete(std::span<const BoundingBox> accepted) override;

  // Instances without an accepted box at IOU >= 0.5.
  std::vector<std::size_t> uncovered(std::span<const BoundingBox> accepted) const;
  bool accurate(const BoundingBox& box) const;

 private:
  bool flip(double p);

  std::vector<BoundingBox> instances_;
  WorkflowNoise noise_;
  std::mt19937_64 rng_;
};

struct BoxSimulation {
  std::size_t images = 0;
  std::size_t complete_images = 0;
  std::size_t boxes = 0;
  std::size_t accurate_boxes = 0;
  std::size_t tasks = 0;
  std::size_t budget_exhausted = 0;
  double coverage_rate() const { return images ? double(complete_images) / images : 0.0; }
  double accuracy_rate() const { return boxes ? double(accurate_boxes) / boxes : 0.0; }
};

// Runs the workflow on `images` synthetic images with 1..max_instances
// instances each.
BoxSimulation simulate_bbox_workflow(std::size_t images, int max_instances,
                                     const WorkflowNoise& noise, std::uint64_t seed);

struct LabelSimulation {
  AnnotationCost cost;
  std::size_t leaf_errors = 0;  // leaf labels that disagree with the truth
};

// Random images where every category is present independently with
// probability `sparsity`; per-image seeds derive from `seed`.
LabelSimulation simulate_labeling(const QuestionTree& tree, std::size_t images, double sparsity,
                                  double answer_noise, std::uint64_t seed);

struct ConsensusSimulation {
  std::size_t images = 0;
  std::size_t accepted = 0;
  std::size_t accepted_good = 0;
  std::size_t rejected = 0;
  std::size_t undecided = 0;
  double mean_accept_posterior = 0;
  std::size_t votes = 0;
  double precision() const { return accepted ? double(accepted_good) / accepted : 0.0; }
};

struct ConsensusSimConfig {
  std::size_t seed_images = 300;
  int seed_votes = 10;
  std::size_t images = 500;
  double good_rate = 0.7;
  double worker_flip = 0.1;
  double threshold = 0.97;
  int vote_cap = 15;
  std::uint64_t seed = 0;
};

ConsensusSimulation simulate_consensus(const ConsensusSimConfig& cfg, ConfidenceTable* table_out = nullptr);

struct LabeledBox {
  CategoryId category;
  std::size_t index = 0;  // position within the (image, category) box list
  BoundingBox box;
};

enum class OverlapKind { kDuplicate, kCrossCategory };

struct OverlapFlag {
  ImageId image;
  OverlapKind kind = OverlapKind::kDuplicate;
  LabeledBox a;
  LabeledBox b;
  double iou = 0;
};

// Same-category pairs with IOU > 0.5 are duplicate candidates; pairs of
// different categories with IOU > cross_threshold are ambiguous-label
// candidates.
std::vector<OverlapFlag> audit_image(const ImageId& image, std::span<const LabeledBox> boxes,
                                     double cross_threshold = 0.5);
std::vector<OverlapFlag> audit_overlaps(const GroundTruthStore& truth,
                                        double cross_threshold = 0.5);

}  // namespace vrc
