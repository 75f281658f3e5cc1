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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vrc/annotation.hpp"
#include "vrc/core.hpp"
#include "vrc/hierarchy.hpp"
#include "vrc/ingest.hpp"

#ifndef VRC_FIXTURE_DIR
#define VRC_FIXTURE_DIR "tests/fixtures"
#endif

namespace fixtures {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(VRC_FIXTURE_DIR) / name;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "vrc-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline vrc::BoundingBox to_vrc(const oracle::Box& b) { return {b.x0, b.y0, b.x1, b.y1}; }
inline oracle::Box to_oracle(const vrc::BoundingBox& b) { return {b.xmin, b.ymin, b.xmax, b.ymax}; }

// Integer-grid box inside [0, extent)^2 with sides in [min_side, max_side].
inline oracle::Box grid_box(std::mt19937_64& rng, int extent, int min_side, int max_side) {
  std::uniform_int_distribution<int> side(min_side, max_side);
  const int w = side(rng), h = side(rng);
  std::uniform_int_distribution<int> x(0, extent - w), y(0, extent - h);
  const double x0 = x(rng), y0 = y(rng);
  return {x0, y0, x0 + w, y0 + h};
}

// Random DAG over n nodes: edges only from lower to higher index, so it is
// acyclic by construction. About 15% of nodes become extra roots and
// `extra_edge` controls how often a node gains further parents.
inline oracle::Dag random_dag(std::mt19937_64& rng, int n, double extra_edge = 0.15) {
  oracle::Dag g;
  g.n = n;
  g.children.assign(n, {});
  std::uniform_real_distribution<double> u(0, 1);
  for (int v = 1; v < n; ++v) {
    if (u(rng) < 0.85) {
      std::uniform_int_distribution<int> p(0, v - 1);
      g.children[p(rng)].push_back(v);
    }
    for (int p = 0; p < v; ++p) {
      if (u(rng) < extra_edge / v &&
          std::find(g.children[p].begin(), g.children[p].end(), v) == g.children[p].end()) {
        g.children[p].push_back(v);
      }
    }
  }
  return g;
}

inline std::string node_name(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "n%03d", v);
  return buf;
}

inline vrc::SynsetGraph to_graph(const oracle::Dag& g) {
  std::vector<vrc::SynsetGraph::Edge> edges;
  std::vector<vrc::CategoryId> isolated;
  for (int v = 0; v < g.n; ++v) {
    for (int c : g.children[v]) edges.emplace_back(node_name(v), node_name(c));
    isolated.push_back(node_name(v));
  }
  return vrc::SynsetGraph(edges, {}, isolated);
}

inline vrc::QuestionTreeSpec to_question_spec(const oracle::Dag& g) {
  vrc::QuestionTreeSpec spec;
  for (int v = 0; v < g.n; ++v) {
    spec.queries.push_back(node_name(v));
    for (int c : g.children[v]) spec.edges.emplace_back(node_name(v), node_name(c));
    if (g.children[v].empty()) spec.bindings.emplace_back(node_name(v), "cat_" + node_name(v));
  }
  return spec;
}

inline vrc::QuestionTree appendix_tree() {
  return vrc::QuestionTree(vrc::parse_question_tree(vrc::read_file(fixture("question_tree.tsv"))));
}

}  // namespace fixtures
