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

#include "vrc/core.hpp"

#include <algorithm>
#include <cmath>

namespace vrc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kUnauthorized: return "unauthorized";
    case ErrorCode::kPayloadTooLarge: return "payload_too_large";
    case ErrorCode::kRateLimited: return "rate_limited";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                  : message),
      code_(code),
      line_(line) {}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kClassification: return "classification";
    case Task::kLocalization: return "localization";
    case Task::kDetection: return "detection";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "classification" || name == "cls") return Task::kClassification;
  if (name == "localization" || name == "loc") return Task::kLocalization;
  if (name == "detection" || name == "det") return Task::kDetection;
  throw Error(ErrorCode::kInvalidArgument, "unknown task '" + std::string(name) + "'");
}

ImageRef make_image(ImageId id, int width, int height) {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty image id");
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "image '" + id + "' must have positive width and height");
  }
  return ImageRef{std::move(id), width, height};
}

bool BoundingBox::valid() const noexcept {
  return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
         std::isfinite(ymax) && xmax > xmin && ymax > ymin;
}

BoundingBox make_box(double xmin, double ymin, double xmax, double ymax) {
  BoundingBox b{xmin, ymin, xmax, ymax};
  if (!b.valid()) {
    throw Error(ErrorCode::kInvalidArgument,
                "degenerate or non-finite box (xmax must exceed xmin, ymax must exceed ymin)");
  }
  return b;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double w = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double h = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

double box_area_fraction(const BoundingBox& box, const ImageRef& image) noexcept {
  const BoundingBox frame{0, 0, static_cast<double>(image.width),
                          static_cast<double>(image.height)};
  return intersection_area(box, frame) / frame.area();
}

BoundingBox normalize_to_unit(const BoundingBox& box, const ImageRef& image) noexcept {
  const double w = image.width;
  const double h = image.height;
  return BoundingBox{box.xmin / w, box.ymin / h, box.xmax / w, box.ymax / h};
}

}  // namespace vrc
