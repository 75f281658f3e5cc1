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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vrc {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  kOk = 0,
  kInvalidArgument = 1,
  kParse = 2,
  kNotFound = 3,
  kIo = 4,
  kUnauthorized = 5,
  kPayloadTooLarge = 6,
  kRateLimited = 7,
  kInternal = 8,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0);

  ErrorCode code() const noexcept { return code_; }
  // 1-based line number for parse errors, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

enum class Task { kClassification, kLocalization, kDetection };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

using CategoryId = std::string;
using ImageId = std::string;

struct ImageRef {
  ImageId id;
  int width = 0;
  int height = 0;

  bool operator==(const ImageRef&) const = default;
};

ImageRef make_image(ImageId id, int width, int height);

// Axis-aligned box in continuous pixel coordinates. Area is
// (xmax - xmin) * (ymax - ymin); there is no +1 pixel convention.
struct BoundingBox {
  double xmin = 0;
  double ymin = 0;
  double xmax = 0;
  double ymax = 0;

  double width() const noexcept { return xmax - xmin; }
  double height() const noexcept { return ymax - ymin; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept;

  bool operator==(const BoundingBox&) const = default;
};

// Throws kInvalidArgument when the coordinates are non-finite or the box
// has no positive area.
BoundingBox make_box(double xmin, double ymin, double xmax, double ymax);

struct ScoredBox {
  BoundingBox box;
  double score = 0;

  bool operator==(const ScoredBox&) const = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b) noexcept;

// Intersection over union. Symmetric, 0 for disjoint boxes, 1 only for
// coordinate-identical boxes.
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

// Fraction of the image frame covered by the box, after clipping the box
// to the frame.
double box_area_fraction(const BoundingBox& box, const ImageRef& image) noexcept;

// Maps the box into the unit square of its own image.
BoundingBox normalize_to_unit(const BoundingBox& box, const ImageRef& image) noexcept;

}  // namespace vrc
