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

// JSON and CSV renderings of evaluation reports. JSON keys are camelCase and
// every report carries a "kind" field naming its schema.

#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vrc/annotation.hpp"
#include "vrc/bootstrap.hpp"
#include "vrc/classification.hpp"
#include "vrc/detection.hpp"
#include "vrc/localization.hpp"
#include "vrc/stats.hpp"

namespace vrc {

using Json = nlohmann::ordered_json;

Json to_json(const BoundingBox& box);
Json to_json(const ClassificationReport& report);
Json to_json(const LocalizationReport& report);
// The match cache, when given, is embedded as "matchCache" so that the
// report can be bootstrapped later.
Json to_json(const DetectionReport& report, const DetectionCache* cache = nullptr);
Json to_json(const TeamRanking& ranking);
Json to_json(const ConfidenceInterval& ci);
Json to_json(const BootstrapConfig& cfg);
Json to_json(const DatasetStats& stats);
Json to_json(const PropertyBins& bins);
Json to_json(const AnnotationCost& cost, bool per_image = false);
Json to_json(const LabelSimulation& sim);
Json to_json(const BoxSimulation& sim);
Json to_json(const ConsensusSimulation& sim);
Json to_json(std::span<const OverlapFlag> flags);

Json cache_to_json(const DetectionCache& cache);
DetectionCache cache_from_json(const Json& j);

// Rebuilds the parts of a detection report that ranking needs (team and
// per-category AP). Throws kParse on a malformed document.
DetectionReport detection_report_from_json(const Json& j);

// Per-class scores of an evaluation report: AP for detection, 1 - top-5
// error for classification and localization.
std::map<CategoryId, double> per_class_scores(const Json& report);

// Confidence interval for the headline metric of an evaluation report:
// top-5 error from the per-image table (classification, localization) or mAP
// from the embedded match cache (detection).
ConfidenceInterval bootstrap_report(const Json& report, const BootstrapConfig& cfg);

BootstrapConfig bootstrap_config_from_json(const Json& j);

std::string stats_csv(const DatasetStats& stats);
std::string bins_csv(std::span<const PropertyBins> bins);
std::string audit_csv(std::span<const OverlapFlag> flags);

}  // namespace vrc
