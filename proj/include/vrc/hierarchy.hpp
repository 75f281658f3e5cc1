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

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vrc/core.hpp"

namespace vrc {

// Immutable concept DAG. Node heights and ancestor sets are computed once
// at construction.
//
// The hierarchical cost of two categories is the minimum height over all of
// their common ancestors (a node is its own ancestor). In a tree this is the
// height of the unique lowest common ancestor.
class SynsetGraph {
 public:
  using Edge = std::pair<CategoryId, CategoryId>;  // parent, child

  // `leaves` lists the categories eligible as prediction targets; when empty,
  // every node without children is a leaf. Throws kInvalidArgument on cycles,
  // self loops and leaf-manifest entries that are not nodes.
  SynsetGraph(const std::vector<Edge>& edges, const std::vector<CategoryId>& leaves = {},
              const std::vector<CategoryId>& isolated_nodes = {});

  std::size_t size() const noexcept { return names_.size(); }
  bool contains(const CategoryId& id) const { return index_.count(id) != 0; }
  bool is_leaf(const CategoryId& id) const;
  bool has_children(const CategoryId& id) const;

  // Length of the longest downward path to a childless node.
  int height(const CategoryId& id) const;

  // Throws kNotFound for unknown ids and kInvalidArgument when the nodes have
  // no common ancestor.
  int hierarchical_cost(const CategoryId& a, const CategoryId& b) const;
  // Same, but nullopt instead of throwing when there is no common ancestor.
  std::optional<int> common_ancestor_cost(const CategoryId& a, const CategoryId& b) const;

  bool is_proper_ancestor(const CategoryId& ancestor, const CategoryId& node) const;

  // Every ordered pair (i, j) of the set where i is a proper ancestor of j.
  // An empty result means the category set is a valid trimmed set.
  std::vector<Edge> validate_trimmed(const std::set<CategoryId>& categories) const;

  // Ids of `id` and all of its descendants, sorted.
  std::vector<CategoryId> descendants_inclusive(const CategoryId& id) const;

  const std::vector<CategoryId>& nodes() const noexcept { return names_; }
  std::vector<CategoryId> leaves() const;
  std::vector<Edge> edges() const;

 private:
  std::uint32_t require(const CategoryId& id) const;

  std::vector<CategoryId> names_;
  std::unordered_map<CategoryId, std::uint32_t> index_;
  std::vector<std::vector<std::uint32_t>> children_;
  std::vector<std::vector<std::uint32_t>> parents_;
  std::vector<int> height_;
  // Sorted node indices of each node's inclusive ancestor set.
  std::vector<std::vector<std::uint32_t>> ancestors_;
  std::vector<bool> leaf_;
};

}  // namespace vrc
