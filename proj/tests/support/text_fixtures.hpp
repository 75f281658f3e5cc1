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

// Plain-text fixtures for tests that must not link the C++ core (the C API
// and CLI tests). Everything here writes files with the standard library.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace textfix {

inline void put(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string get(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Detection truth: 10 images, image i has one box of category c(i % 2) at
// (10, 10, 60, 60), plus a second, overlapping box on img0 for the audit.
inline void detection_truth(const std::filesystem::path& dir) {
  std::string images, boxes;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "img" + std::to_string(i);
    images += id + "\t100\t80\n";
    boxes += id + "\tc" + std::to_string(i % 2) + "\t10\t10\t60\t60\n";
  }
  boxes += "img0\tc1\t12\t12\t60\t60\n";
  put(dir / "task", "detection\n");
  put(dir / "images.tsv", images);
  put(dir / "categories.txt", "c0\nc1\n");
  put(dir / "boxes.tsv", boxes);
}

// Finds every c0 instance and half of the c1 instances.
inline std::string detection_submission() {
  std::string s;
  for (int i = 0; i < 10; ++i) {
    if (i % 2 == 1 && i > 5) continue;
    s += "img" + std::to_string(i) + " c" + std::to_string(i % 2) + " 0.8 10 10 60 60\n";
  }
  return s;
}

inline void classification_truth(const std::filesystem::path& dir) {
  put(dir / "task", "classification\n");
  put(dir / "images.tsv", "a\t10\t10\nb\t10\t10\nc\t10\t10\nd\t10\t10\n");
  put(dir / "categories.txt", "dog\ncat\ncar\n");
  put(dir / "labels.tsv", "a\tdog\nb\tcat\nc\tcar\nd\tdog\n");
  put(dir / "blacklist.tsv", "d\n");
}

inline void hierarchy(const std::filesystem::path& path) {
  put(path, "entity\tanimal\nentity\tvehicle\nanimal\tdog\nanimal\tcat\nvehicle\tcar\n");
}

inline void question_tree(const std::filesystem::path& path) {
  put(path,
      "E\tanimal\tdog\nE\tanimal\tcat\nE\tthing\tcar\nE\tthing\tcup\n"
      "B\tdog\tn_dog\nB\tcat\tn_cat\nB\tcar\tn_car\nB\tcup\tn_cup\n");
}

}  // namespace textfix
