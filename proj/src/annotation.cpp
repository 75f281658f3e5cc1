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

#include "vrc/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "vrc/bootstrap.hpp"

namespace vrc {
namespace {

std::size_t intern(const std::string& id, std::vector<std::string>& ids,
                   std::unordered_map<std::string, std::size_t>& index) {
  auto [it, inserted] = index.emplace(id, ids.size());
  if (inserted) ids.push_back(id);
  return it->second;
}

std::vector<std::size_t> ancestors_of(const QuestionTree& tree, std::size_t q) {
  std::vector<bool> seen(tree.size(), false);
  std::vector<std::size_t> out, stack{q};
  while (!stack.empty()) {
    auto cur = stack.back();
    stack.pop_back();
    for (auto p : tree.parents(cur)) {
      if (!seen[p]) {
        seen[p] = true;
        out.push_back(p);
        stack.push_back(p);
      }
    }
  }
  return out;
}

std::mt19937_64 image_generator(std::uint64_t seed, std::uint64_t i) {
  return round_generator(splitmix64(seed), i);
}

}  // namespace

QuestionTree::QuestionTree(const QuestionTreeSpec& spec) {
  for (const auto& q : spec.queries) intern(q, ids_, index_);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [p, c] : spec.edges) {
    if (p == c) throw Error(ErrorCode::kInvalidArgument, "query " + p + " is its own child");
    const auto a = intern(p, ids_, index_);
    const auto b = intern(c, ids_, index_);
    edges.emplace_back(a, b);
  }
  for (const auto& [q, cat] : spec.bindings) intern(q, ids_, index_);

  const std::size_t n = ids_.size();
  children_.assign(n, {});
  parents_.assign(n, {});
  for (auto [a, b] : edges) {
    if (std::find(children_[a].begin(), children_[a].end(), b) != children_[a].end()) continue;
    children_[a].push_back(b);
    parents_[b].push_back(a);
  }

  std::vector<std::size_t> indegree(n), order;
  for (std::size_t q = 0; q < n; ++q) indegree[q] = parents_[q].size();
  std::deque<std::size_t> ready;
  for (std::size_t q = 0; q < n; ++q) {
    if (indegree[q] == 0) {
      ready.push_back(q);
      roots_.push_back(q);
    }
  }
  while (!ready.empty()) {
    auto q = ready.front();
    ready.pop_front();
    order.push_back(q);
    for (auto c : children_[q]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) throw Error(ErrorCode::kInvalidArgument, "question graph has a cycle");

  descendants_.assign(n, {});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto& d = descendants_[*it];
    for (auto c : children_[*it]) {
      d.push_back(c);
      d.insert(d.end(), descendants_[c].begin(), descendants_[c].end());
    }
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
  }

  category_.assign(n, std::nullopt);
  for (const auto& [id, cat] : spec.bindings) {
    const auto q = index_.at(id);
    if (!children_[q].empty()) {
      throw Error(ErrorCode::kInvalidArgument, "internal query " + id + " cannot bind a category");
    }
    if (category_[q]) throw Error(ErrorCode::kInvalidArgument, "query " + id + " is bound twice");
    if (!leaf_of_.emplace(cat, q).second) {
      throw Error(ErrorCode::kInvalidArgument, "category " + cat + " is bound twice");
    }
    category_[q] = cat;
  }
  for (std::size_t q = 0; q < n; ++q) {
    if (children_[q].empty() && !category_[q]) {
      throw Error(ErrorCode::kInvalidArgument, "leaf query " + ids_[q] + " has no category");
    }
  }
}

std::size_t QuestionTree::index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kNotFound, "unknown query " + id);
  return it->second;
}

std::vector<std::size_t> QuestionTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < size(); ++q) {
    if (children_[q].empty()) out.push_back(q);
  }
  return out;
}

std::size_t QuestionTree::leaf_for(const CategoryId& category) const {
  auto it = leaf_of_.find(category);
  if (it == leaf_of_.end()) throw Error(ErrorCode::kNotFound, "unknown category " + category);
  return it->second;
}

std::vector<CategoryId> QuestionTree::categories() const {
  std::vector<CategoryId> out;
  for (const auto& [cat, q] : leaf_of_) out.push_back(cat);
  return out;
}

TruthfulOracle::TruthfulOracle(const QuestionTree& tree, const std::set<CategoryId>& present)
    : truth_(tree.size(), false) {
  for (const auto& cat : present) {
    const auto leaf = tree.leaf_for(cat);
    truth_[leaf] = true;
    for (auto a : ancestors_of(tree, leaf)) truth_[a] = true;
  }
}

NoisyOracle::NoisyOracle(const QuestionTree& tree, const std::set<CategoryId>& present,
                         double flip, std::uint64_t seed)
    : truthful_(tree, present), flip_(flip), rng_(splitmix64(seed)) {
  if (!(flip >= 0.0 && flip <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "flip probability must lie in [0, 1]");
  }
}

Answer NoisyOracle::answer(std::size_t query) {
  bool yes = truthful_.truth(query);
  if (uniform01(rng_) < flip_) yes = !yes;
  return yes ? Answer::kYes : Answer::kNo;
}

std::set<CategoryId> LabelState::present_categories(const QuestionTree& tree) const {
  std::set<CategoryId> out;
  for (std::size_t q = 0; q < labels.size(); ++q) {
    if (labels[q] == Answer::kYes && tree.category_of(q)) out.insert(*tree.category_of(q));
  }
  return out;
}

LabelState plan_and_label(const QuestionTree& tree, AnswerOracle& oracle,
                          const std::map<std::string, Answer>& initial) {
  const std::size_t n = tree.size();
  std::vector<Answer> known(n, Answer::kUnset);
  auto mark = [&](std::size_t q, Answer a) {
    if (known[q] != Answer::kUnset && known[q] != a) {
      throw Error(ErrorCode::kInvalidArgument,
                  "initial labels conflict at query " + tree.id(q));
    }
    known[q] = a;
  };
  for (const auto& [id, a] : initial) {
    if (a == Answer::kUnset) continue;
    const auto q = tree.index(id);
    mark(q, a);
    if (a == Answer::kYes) {
      for (auto p : ancestors_of(tree, q)) mark(p, Answer::kYes);
    } else {
      for (auto d : tree.descendants(q)) mark(d, Answer::kNo);
    }
  }

  LabelState state;
  state.labels.assign(n, Answer::kUnset);
  std::vector<bool> processed(n, false), queued(n, false);
  std::deque<std::size_t> queue;
  for (auto r : tree.roots()) {
    queue.push_back(r);
    queued[r] = true;
  }
  while (!queue.empty()) {
    const auto q = queue.front();
    queue.pop_front();
    if (processed[q]) continue;  // swept by a "no" while waiting
    Answer a = known[q];
    const bool asked = a == Answer::kUnset;
    if (asked) {
      a = oracle.answer(q);
      ++state.queries_issued;
    }
    state.labels[q] = a;
    processed[q] = true;
    state.log.push_back({q, a, asked});
    if (a == Answer::kYes) {
      for (auto c : tree.children(q)) {
        if (!processed[c] && !queued[c]) {
          queue.push_back(c);
          queued[c] = true;
        }
      }
    } else {
      for (auto d : tree.descendants(q)) {
        if (!processed[d]) {
          state.labels[d] = Answer::kNo;
          processed[d] = true;
        }
      }
    }
  }
  return state;
}

AnnotationCost annotation_cost_report(const QuestionTree& tree,
                                      std::span<const std::set<CategoryId>> images) {
  AnnotationCost cost;
  for (const auto& present : images) {
    TruthfulOracle oracle(tree, present);
    const auto state = plan_and_label(tree, oracle);
    cost.per_image.push_back(state.queries_issued);
    cost.total += state.queries_issued;
  }
  cost.naive_total = images.size() * tree.category_count();
  if (!images.empty()) cost.mean_per_image = double(cost.total) / images.size();
  if (cost.naive_total) cost.ratio_to_naive = double(cost.total) / cost.naive_total;
  return cost;
}

std::string_view decision_name(ConsensusDecision d) {
  switch (d) {
    case ConsensusDecision::kAccept: return "accept";
    case ConsensusDecision::kReject: return "reject";
    case ConsensusDecision::kNeedMoreVotes: return "need_more_votes";
    case ConsensusDecision::kUndecided: return "undecided";
  }
  return "unknown";
}

ConsensusTracker::ConsensusTracker(const ConfidenceTable& table, double threshold, int vote_cap)
    : table_(table), threshold_(threshold), vote_cap_(vote_cap) {
  if (table.empty()) throw Error(ErrorCode::kInvalidArgument, "confidence table is empty");
  if (!(threshold > 0.5 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "consensus threshold must lie in (0.5, 1]");
  }
  if (vote_cap < 1) throw Error(ErrorCode::kInvalidArgument, "vote cap must be positive");
}

double ConsensusTracker::lookup(int yes, int no) {
  if (auto it = table_.find({yes, no}); it != table_.end()) return it->second;
  outcome_.fallback_used = true;
  int best = std::numeric_limits<int>::max();
  double value = 0;
  for (const auto& [tally, p] : table_) {
    const int d = std::abs(tally.first - yes) + std::abs(tally.second - no);
    if (d < best) {  // map order visits smaller yes counts first
      best = d;
      value = p;
    }
  }
  return value;
}

ConsensusOutcome ConsensusTracker::add_vote(bool yes) {
  if (outcome_.decision != ConsensusDecision::kNeedMoreVotes) return outcome_;
  (yes ? outcome_.yes : outcome_.no) += 1;
  outcome_.posterior = lookup(outcome_.yes, outcome_.no);
  if (outcome_.posterior >= threshold_) {
    outcome_.decision = ConsensusDecision::kAccept;
  } else if (outcome_.posterior <= 1.0 - threshold_) {
    outcome_.decision = ConsensusDecision::kReject;
  } else if (outcome_.yes + outcome_.no >= vote_cap_) {
    outcome_.decision = ConsensusDecision::kUndecided;
  }
  return outcome_;
}

ConsensusOutcome consensus_label(std::span<const bool> votes, const ConfidenceTable& table,
                                 double threshold, int vote_cap) {
  ConsensusTracker tracker(table, threshold, vote_cap);
  for (bool v : votes) {
    if (tracker.add_vote(v).decision != ConsensusDecision::kNeedMoreVotes) break;
  }
  return tracker.outcome();
}

ConfidenceTable estimate_confidence_table(std::span<const SeedImage> seed, int max_votes) {
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> counts;  // (good, total)
  for (const auto& img : seed) {
    int yes = 0, no = 0;
    const int limit = std::min<int>(max_votes, static_cast<int>(img.votes.size()));
    for (int k = 0; k < limit; ++k) {
      (img.votes[k] ? yes : no) += 1;
      auto& c = counts[{yes, no}];
      c.first += img.good ? 1 : 0;
      c.second += 1;
    }
  }
  ConfidenceTable table;
  for (const auto& [tally, c] : counts) table[tally] = double(c.first) / double(c.second);
  return table;
}

WorkflowResult bbox_workflow(DrawWorker& drawer, QualityWorker& quality, CoverageWorker& coverage,
                             std::span<const BoundingBox> initial, std::size_t max_tasks) {
  WorkflowResult result;
  result.boxes.assign(initial.begin(), initial.end());
  auto tasks = [&] { return result.draw_tasks + result.quality_tasks + result.coverage_tasks; };
  bool check_coverage = !result.boxes.empty();
  while (true) {
    if (tasks() >= max_tasks) {
      result.budget_exhausted = true;
      break;
    }
    if (check_coverage) {
      ++result.coverage_tasks;
      const bool done = coverage.complete(result.boxes);
      result.audit.push_back({WorkflowTask::kCoverage, done, std::nullopt});
      if (done) break;
      check_coverage = false;
      continue;
    }
    ++result.draw_tasks;
    auto box = drawer.draw(result.boxes);
    result.audit.push_back({WorkflowTask::kDraw, box.has_value(), box});
    if (!box) {
      check_coverage = true;
      if (result.boxes.empty()) break;  // nothing in the image
      continue;
    }
    if (tasks() >= max_tasks) {
      result.budget_exhausted = true;
      break;
    }
    ++result.quality_tasks;
    const bool ok = quality.accept(*box, result.boxes);
    result.audit.push_back({WorkflowTask::kQuality, ok, box});
    if (ok) {
      result.boxes.push_back(*box);
      check_coverage = true;
    }
  }
  return result;
}

SimulatedWorkers::SimulatedWorkers(std::vector<BoundingBox> instances, WorkflowNoise noise,
                                   std::uint64_t seed)
    : instances_(std::move(instances)), noise_(noise), rng_(splitmix64(seed)) {}

bool SimulatedWorkers::flip(double p) { return p > 0 && uniform01(rng_) < p; }

std::vector<std::size_t> SimulatedWorkers::uncovered(std::span<const BoundingBox> accepted) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const bool hit = std::any_of(accepted.begin(), accepted.end(),
                                 [&](const BoundingBox& b) { return iou(b, instances_[i]) >= 0.5; });
    if (!hit) out.push_back(i);
  }
  return out;
}

bool SimulatedWorkers::accurate(const BoundingBox& box) const {
  return std::any_of(instances_.begin(), instances_.end(),
                     [&](const BoundingBox& b) { return iou(box, b) >= noise_.accurate_iou; });
}

std::optional<BoundingBox> SimulatedWorkers::draw(std::span<const BoundingBox> accepted) {
  const auto open = uncovered(accepted);
  if (open.empty()) return std::nullopt;
  const auto& inst = instances_[open[uniform_index(rng_, open.size())]];
  if (!flip(noise_.draw_error)) return inst;
  // Loose box: grow the instance about its center so that IOU = 1 / f^2
  // lands between 0.5 and accurate_iou.
  const double lo = 0.5 + 0.02, hi = std::max(lo, noise_.accurate_iou - 0.02);
  const double target = lo + (hi - lo) * uniform01(rng_);
  const double f = 1.0 / std::sqrt(target);
  const double cx = (inst.xmin + inst.xmax) / 2, cy = (inst.ymin + inst.ymax) / 2;
  const double hw = inst.width() * f / 2, hh = inst.height() * f / 2;
  return BoundingBox{cx - hw, cy - hh, cx + hw, cy + hh};
}

bool SimulatedWorkers::accept(const BoundingBox& candidate, std::span<const BoundingBox> accepted) {
  bool good = false;
  for (auto i : uncovered(accepted)) {
    if (iou(candidate, instances_[i]) >= noise_.accurate_iou) good = true;
  }
  return flip(noise_.quality_flip) ? !good : good;
}

bool SimulatedWorkers::complete(std::span<const BoundingBox> accepted) {
  const bool done = uncovered(accepted).empty();
  return flip(noise_.coverage_flip) ? !done : done;
}

BoxSimulation simulate_bbox_workflow(std::size_t images, int max_instances,
                                     const WorkflowNoise& noise, std::uint64_t seed) {
  if (max_instances < 1) throw Error(ErrorCode::kInvalidArgument, "max_instances must be positive");
  constexpr double kWidth = 500, kHeight = 375;
  BoxSimulation sim;
  for (std::size_t i = 0; i < images; ++i) {
    auto rng = image_generator(seed, i);
    int count = 1;
    while (count < max_instances && uniform01(rng) < 0.4) ++count;
    std::vector<BoundingBox> instances;
    for (int attempt = 0; static_cast<int>(instances.size()) < count && attempt < 1000; ++attempt) {
      const double w = 30 + 170 * uniform01(rng), h = 30 + 170 * uniform01(rng);
      const double x = (kWidth - w) * uniform01(rng), y = (kHeight - h) * uniform01(rng);
      BoundingBox b{x, y, x + w, y + h};
      const bool clash = std::any_of(instances.begin(), instances.end(),
                                     [&](const BoundingBox& o) { return iou(o, b) >= 0.3; });
      if (!clash) instances.push_back(b);
    }
    SimulatedWorkers workers(instances, noise, rng());
    const auto result = bbox_workflow(workers, workers, workers);
    ++sim.images;
    if (workers.uncovered(result.boxes).empty()) ++sim.complete_images;
    sim.boxes += result.boxes.size();
    for (const auto& b : result.boxes) sim.accurate_boxes += workers.accurate(b) ? 1 : 0;
    sim.tasks += result.draw_tasks + result.quality_tasks + result.coverage_tasks;
    sim.budget_exhausted += result.budget_exhausted ? 1 : 0;
  }
  return sim;
}

LabelSimulation simulate_labeling(const QuestionTree& tree, std::size_t images, double sparsity,
                                  double answer_noise, std::uint64_t seed) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sparsity must lie in [0, 1]");
  }
  const auto cats = tree.categories();
  LabelSimulation sim;
  std::vector<std::set<CategoryId>> truth(images);
  for (std::size_t i = 0; i < images; ++i) {
    auto rng = image_generator(seed, i);
    for (const auto& c : cats) {
      if (uniform01(rng) < sparsity) truth[i].insert(c);
    }
    NoisyOracle oracle(tree, truth[i], answer_noise, rng());
    const auto state = plan_and_label(tree, oracle);
    sim.cost.per_image.push_back(state.queries_issued);
    sim.cost.total += state.queries_issued;
    for (const auto& c : cats) {
      const bool labeled = state.labels[tree.leaf_for(c)] == Answer::kYes;
      if (labeled != (truth[i].count(c) > 0)) ++sim.leaf_errors;
    }
  }
  sim.cost.naive_total = images * tree.category_count();
  if (images) sim.cost.mean_per_image = double(sim.cost.total) / images;
  if (sim.cost.naive_total) sim.cost.ratio_to_naive = double(sim.cost.total) / sim.cost.naive_total;
  return sim;
}

ConsensusSimulation simulate_consensus(const ConsensusSimConfig& cfg, ConfidenceTable* table_out) {
  if (!(cfg.good_rate >= 0.0 && cfg.good_rate <= 1.0) ||
      !(cfg.worker_flip >= 0.0 && cfg.worker_flip <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rates must lie in [0, 1]");
  }
  if (cfg.seed_images == 0 || cfg.seed_votes < 1) {
    throw Error(ErrorCode::kInvalidArgument, "the seed sample needs images and votes");
  }
  auto vote = [&](std::mt19937_64& rng, bool good) {
    return uniform01(rng) < cfg.worker_flip ? !good : good;
  };
  std::vector<SeedImage> seed(cfg.seed_images);
  for (std::size_t i = 0; i < seed.size(); ++i) {
    auto rng = image_generator(cfg.seed, i);
    seed[i].good = uniform01(rng) < cfg.good_rate;
    for (int k = 0; k < cfg.seed_votes; ++k) seed[i].votes.push_back(vote(rng, seed[i].good));
  }
  const auto table = estimate_confidence_table(seed, cfg.seed_votes);
  if (table_out) *table_out = table;

  ConsensusSimulation sim;
  double posterior_sum = 0;
  for (std::size_t i = 0; i < cfg.images; ++i) {
    auto rng = image_generator(cfg.seed ^ 0x5eedULL, i);
    const bool good = uniform01(rng) < cfg.good_rate;
    ConsensusTracker tracker(table, cfg.threshold, cfg.vote_cap);
    while (tracker.outcome().decision == ConsensusDecision::kNeedMoreVotes) {
      tracker.add_vote(vote(rng, good));
      ++sim.votes;
    }
    const auto& o = tracker.outcome();
    ++sim.images;
    switch (o.decision) {
      case ConsensusDecision::kAccept:
        ++sim.accepted;
        sim.accepted_good += good ? 1 : 0;
        posterior_sum += o.posterior;
        break;
      case ConsensusDecision::kReject: ++sim.rejected; break;
      default: ++sim.undecided; break;
    }
  }
  if (sim.accepted) sim.mean_accept_posterior = posterior_sum / sim.accepted;
  return sim;
}

std::vector<OverlapFlag> audit_image(const ImageId& image, std::span<const LabeledBox> boxes,
                                     double cross_threshold) {
  std::vector<OverlapFlag> flags;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const double v = iou(boxes[i].box, boxes[j].box);
      const bool same = boxes[i].category == boxes[j].category;
      if (same && v > 0.5) {
        flags.push_back({image, OverlapKind::kDuplicate, boxes[i], boxes[j], v});
      } else if (!same && v > cross_threshold) {
        flags.push_back({image, OverlapKind::kCrossCategory, boxes[i], boxes[j], v});
      }
    }
  }
  return flags;
}

std::vector<OverlapFlag> audit_overlaps(const GroundTruthStore& truth, double cross_threshold) {
  std::map<ImageId, std::vector<LabeledBox>> per_image;
  for (const auto& [key, list] : truth.boxes) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      per_image[key.first].push_back({key.second, k, list[k]});
    }
  }
  std::vector<OverlapFlag> flags;
  for (const auto& id : truth.image_order()) {
    auto it = per_image.find(id);
    if (it == per_image.end()) continue;
    auto f = audit_image(id, it->second, cross_threshold);
    flags.insert(flags.end(), f.begin(), f.end());
  }
  return flags;
}

}  // namespace vrc
