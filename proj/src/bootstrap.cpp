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

#include "vrc/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vrc/parallel.hpp"

namespace vrc {
namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// Number of ordered resamples, or 0 when it exceeds `cap`.
std::uint64_t enumeration_size(std::span<const std::size_t> sizes, std::uint64_t cap) {
  std::uint64_t total = 1;
  for (auto n : sizes) {
    for (std::size_t k = 0; k < n; ++k) {
      if (total > cap / n) return 0;
      total *= n;
    }
  }
  return total;
}

void fill_random(std::span<const std::size_t> sizes, std::uint64_t seed, std::uint64_t round,
                 std::vector<std::uint32_t>& counts) {
  auto rng = round_generator(seed, round);
  std::size_t offset = 0;
  for (auto n : sizes) {
    for (std::size_t k = 0; k < n; ++k) ++counts[offset + uniform_index(rng, n)];
    offset += n;
  }
}

void fill_enumerated(std::span<const std::size_t> sizes, std::uint64_t round,
                     std::vector<std::uint32_t>& counts) {
  std::size_t offset = 0;
  for (auto n : sizes) {
    for (std::size_t k = 0; k < n; ++k) {
      ++counts[offset + round % n];
      round /= n;
    }
    offset += n;
  }
}

}  // namespace

void validate(const BootstrapConfig& cfg) {
  if (cfg.rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds must be at least 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 0.5)");
  }
  if (!(cfg.convergence_tol >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "convergence tolerance must be non-negative");
  }
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGoldenGamma;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 round_generator(std::uint64_t seed, std::uint64_t round) {
  return std::mt19937_64(splitmix64(seed + round * kGoldenGamma));
}

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double interpolated_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

bool check_convergence(std::span<const std::pair<double, double>> checkpoints, double tol) {
  if (checkpoints.size() < 2) return false;
  const auto& prev = checkpoints[checkpoints.size() - 2];
  const auto& last = checkpoints.back();
  return std::abs(last.first - prev.first) < tol && std::abs(last.second - prev.second) < tol;
}

ConfidenceInterval bootstrap_statistic(std::span<const std::size_t> group_sizes, double point,
                                       const ResampledStatistic& statistic,
                                       const BootstrapConfig& cfg) {
  validate(cfg);
  if (group_sizes.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to resample");
  for (auto n : group_sizes) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "cannot resample an empty group");
  }
  const std::size_t items = std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});

  ConfidenceInterval ci;
  ci.point = point;
  const std::uint64_t space =
      cfg.exact_when_enumerable ? enumeration_size(group_sizes, cfg.rounds) : 0;
  ci.exhaustive = space != 0;

  std::vector<std::optional<double>> results;
  auto run_rounds = [&](std::size_t begin, std::size_t end) {
    results.resize(end);
    parallel_for(end - begin, cfg.threads, [&](std::size_t i) {
      thread_local std::vector<std::uint32_t> counts;
      counts.assign(items, 0);
      const std::uint64_t r = begin + i;
      if (ci.exhaustive) {
        fill_enumerated(group_sizes, r, counts);
      } else {
        fill_random(group_sizes, cfg.seed, r, counts);
      }
      results[r] = statistic(counts);
    });
  };

  std::vector<double> sorted;
  auto summarize = [&] {
    sorted.clear();
    for (const auto& r : results) {
      if (r) sorted.push_back(*r);
    }
    if (sorted.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "statistic undefined in every bootstrap round");
    }
    std::sort(sorted.begin(), sorted.end());
    ci.quantile_lower = interpolated_quantile(sorted, cfg.alpha);
    ci.quantile_upper = interpolated_quantile(sorted, 1.0 - cfg.alpha);
    ci.checkpoints.emplace_back(ci.quantile_lower, ci.quantile_upper);
  };

  std::size_t rounds = ci.exhaustive ? static_cast<std::size_t>(space) : cfg.rounds;
  run_rounds(0, rounds);
  summarize();
  if (ci.exhaustive) {
    ci.converged = true;
  } else {
    while (!check_convergence(ci.checkpoints, cfg.convergence_tol) &&
           rounds * 2 <= cfg.max_rounds) {
      run_rounds(rounds, rounds * 2);
      rounds *= 2;
      summarize();
    }
    ci.converged = check_convergence(ci.checkpoints, cfg.convergence_tol);
  }

  ci.rounds_used = rounds;
  ci.rounds_skipped = rounds - sorted.size();
  ci.round_min = sorted.front();
  ci.round_max = sorted.back();
  ci.lower = std::min(ci.quantile_lower, point);
  ci.upper = std::max(ci.quantile_upper, point);
  return ci;
}

ConfidenceInterval bootstrap_mean_metric(std::span<const double> per_image_scores,
                                         const BootstrapConfig& cfg) {
  if (per_image_scores.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "bootstrap needs a non-empty score table");
  }
  const double n = static_cast<double>(per_image_scores.size());
  const double point = std::accumulate(per_image_scores.begin(), per_image_scores.end(), 0.0) / n;
  const std::size_t sizes[] = {per_image_scores.size()};
  return bootstrap_statistic(
      sizes, point,
      [&](std::span<const std::uint32_t> counts) -> std::optional<double> {
        double sum = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
          if (counts[i]) sum += counts[i] * per_image_scores[i];
        }
        return sum / n;
      },
      cfg);
}

ConfidenceInterval bootstrap_map(const DetectionCache& cache, const BootstrapConfig& cfg) {
  if (cache.images.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "bootstrap needs at least one image");
  }
  // Sort each category's outcomes once; rounds only rewrite the weights.
  struct Prepared {
    std::vector<WeightedOutcome> outcomes;
    std::vector<std::uint32_t> outcome_image;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;  // (image, count)
  };
  std::vector<Prepared> categories;
  for (const auto& [cat, entries] : cache.per_category) {
    Prepared p;
    std::vector<std::tuple<double, std::size_t, bool, std::uint32_t>> rows;
    for (const auto& e : entries) {
      if (e.truth_count) p.truth.emplace_back(e.image, e.truth_count);
      for (const auto& [score, tp] : e.outcomes) rows.emplace_back(score, rows.size(), tp, e.image);
    }
    if (p.truth.empty()) continue;
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    for (const auto& [score, _, tp, image] : rows) {
      p.outcomes.push_back({score, tp, 1});
      p.outcome_image.push_back(image);
    }
    categories.push_back(std::move(p));
  }
  if (categories.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no category has truth instances");
  }

  auto map_for = [&](std::span<const std::uint32_t> weights) -> std::optional<double> {
    thread_local std::vector<WeightedOutcome> scratch;
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& p : categories) {
      std::uint64_t total = 0;
      for (const auto& [image, count] : p.truth) total += std::uint64_t{weights[image]} * count;
      if (total == 0) continue;
      scratch = p.outcomes;
      for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i].weight = weights[p.outcome_image[i]];
      sum += average_precision(pr_curve_sorted(scratch, total));
      ++counted;
    }
    if (counted == 0) return std::nullopt;
    return sum / counted;
  };

  const std::vector<std::uint32_t> ones(cache.images.size(), 1);
  const double point = *map_for(ones);
  const std::size_t sizes[] = {cache.images.size()};
  return bootstrap_statistic(sizes, point, map_for, cfg);
}

}  // namespace vrc
