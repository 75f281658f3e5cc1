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

// Percentile bootstrap over image (or category) resampling.
//
// Round r draws its sample from std::mt19937_64 seeded with
// splitmix64(seed + r * golden_gamma), and maps raw 64-bit outputs to indices
// with Lemire's multiply-shift rejection method. Both are fully specified, so
// a (seed, round) pair gives the same sample on every platform and for any
// thread count. Quantiles use linear interpolation between order statistics
// (h = (n - 1) p).
//
// When the whole resampling space is no larger than the requested number of
// rounds (n^n ordered samples for n items), every sample is enumerated
// exactly once instead and the quantiles describe the exact bootstrap
// distribution.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "vrc/detection.hpp"

namespace vrc {

struct BootstrapConfig {
  std::size_t rounds = 20000;
  double alpha = 0.0005;  // tail fraction per side; 0.0005 gives a 99.9% interval
  std::uint64_t seed = 0;
  double convergence_tol = 1e-4;
  // When larger than `rounds`, rounds are doubled until both endpoints move
  // less than convergence_tol or this many rounds have been run.
  std::size_t max_rounds = 0;
  unsigned threads = 1;
  bool exact_when_enumerable = true;
};

void validate(const BootstrapConfig& cfg);

struct ConfidenceInterval {
  double point = 0;
  // Reported interval; widened if needed so that lower <= point <= upper.
  double lower = 0;
  double upper = 0;
  // Raw interpolated quantiles of the round results.
  double quantile_lower = 0;
  double quantile_upper = 0;
  double round_min = 0;
  double round_max = 0;
  std::size_t rounds_used = 0;
  std::size_t rounds_skipped = 0;  // rounds where the statistic was undefined
  bool exhaustive = false;
  bool converged = false;
  std::vector<std::pair<double, double>> checkpoints;  // (lower, upper) per doubling
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Generator for bootstrap round `round`.
std::mt19937_64 round_generator(std::uint64_t seed, std::uint64_t round);

// Uniform integer in [0, n) for n >= 1.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(std::mt19937_64& rng);

// p in [0, 1]; `sorted` non-empty and ascending.
double interpolated_quantile(std::span<const double> sorted, double p);

// Items are split into independent groups; every group of size n is
// resampled with replacement n times per round. The statistic receives the
// flattened per-item multiplicities (group after group) and may return
// nullopt to skip a round.
using ResampledStatistic = std::function<std::optional<double>(std::span<const std::uint32_t>)>;

ConfidenceInterval bootstrap_statistic(std::span<const std::size_t> group_sizes, double point,
                                       const ResampledStatistic& statistic,
                                       const BootstrapConfig& cfg);

// CI of the mean of precomputed per-image scores. Throws kInvalidArgument on
// an empty table.
ConfidenceInterval bootstrap_mean_metric(std::span<const double> per_image_scores,
                                         const BootstrapConfig& cfg);

// CI of mAP by resampling images of a cached detection evaluation. An image
// drawn m times contributes its detections and truth counts m times.
ConfidenceInterval bootstrap_map(const DetectionCache& cache, const BootstrapConfig& cfg);

// True when there are at least two checkpoints and both endpoints of the last
// two differ by less than `tol`.
bool check_convergence(std::span<const std::pair<double, double>> checkpoints, double tol);

}  // namespace vrc
