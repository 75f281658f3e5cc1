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

#include "vrc/hierarchy.hpp"

#include <algorithm>
#include <climits>
#include <deque>

namespace vrc {

SynsetGraph::SynsetGraph(const std::vector<Edge>& edges, const std::vector<CategoryId>& leaves,
                         const std::vector<CategoryId>& isolated_nodes) {
  auto intern = [this](const CategoryId& id) -> std::uint32_t {
    if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty category id in hierarchy");
    auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(names_.size()));
    if (inserted) {
      names_.push_back(id);
      children_.emplace_back();
      parents_.emplace_back();
    }
    return it->second;
  };
  for (const auto& id : isolated_nodes) intern(id);
  for (const auto& [parent, child] : edges) {
    if (parent == child) {
      throw Error(ErrorCode::kInvalidArgument, "self loop on '" + parent + "'");
    }
    const auto p = intern(parent);
    const auto c = intern(child);
    if (std::find(children_[p].begin(), children_[p].end(), c) == children_[p].end()) {
      children_[p].push_back(c);
      parents_[c].push_back(p);
    }
  }

  // Kahn's algorithm gives a topological order and detects cycles.
  const std::size_t n = names_.size();
  std::vector<std::size_t> indegree(n);
  for (std::size_t v = 0; v < n; ++v) indegree[v] = parents_[v].size();
  std::deque<std::uint32_t> ready;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::vector<std::uint32_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const auto v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (auto c : children_[v]) {
      if (--indegree[c] == 0) ready.push_back(c);
    }
  }
  if (order.size() != n) throw Error(ErrorCode::kInvalidArgument, "hierarchy contains a cycle");

  height_.assign(n, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int h = 0;
    for (auto c : children_[*it]) h = std::max(h, height_[c] + 1);
    height_[*it] = h;
  }

  ancestors_.assign(n, {});
  for (auto v : order) {
    auto& anc = ancestors_[v];
    anc.push_back(v);
    for (auto p : parents_[v]) anc.insert(anc.end(), ancestors_[p].begin(), ancestors_[p].end());
    std::sort(anc.begin(), anc.end());
    anc.erase(std::unique(anc.begin(), anc.end()), anc.end());
  }

  leaf_.assign(n, false);
  if (leaves.empty()) {
    for (std::size_t v = 0; v < n; ++v) leaf_[v] = children_[v].empty();
  } else {
    for (const auto& id : leaves) {
      auto it = index_.find(id);
      if (it == index_.end()) {
        throw Error(ErrorCode::kInvalidArgument, "leaf manifest names unknown node '" + id + "'");
      }
      leaf_[it->second] = true;
    }
  }
}

std::uint32_t SynsetGraph::require(const CategoryId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kNotFound, "unknown category '" + id + "'");
  return it->second;
}

bool SynsetGraph::is_leaf(const CategoryId& id) const { return leaf_[require(id)]; }

bool SynsetGraph::has_children(const CategoryId& id) const {
  return !children_[require(id)].empty();
}

int SynsetGraph::height(const CategoryId& id) const { return height_[require(id)]; }

std::optional<int> SynsetGraph::common_ancestor_cost(const CategoryId& a,
                                                    const CategoryId& b) const {
  const auto ia = require(a);
  const auto ib = require(b);
  if (ia == ib) return height_[ia];
  const auto& x = ancestors_[ia];
  const auto& y = ancestors_[ib];
  int best = INT_MAX;
  auto i = x.begin();
  auto j = y.begin();
  while (i != x.end() && j != y.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      best = std::min(best, height_[*i]);
      ++i;
      ++j;
    }
  }
  if (best == INT_MAX) return std::nullopt;
  return best;
}

int SynsetGraph::hierarchical_cost(const CategoryId& a, const CategoryId& b) const {
  const auto cost = common_ancestor_cost(a, b);
  if (!cost) {
    throw Error(ErrorCode::kInvalidArgument,
                "categories '" + a + "' and '" + b + "' have no common ancestor");
  }
  return *cost;
}

bool SynsetGraph::is_proper_ancestor(const CategoryId& ancestor, const CategoryId& node) const {
  const auto ia = require(ancestor);
  const auto in = require(node);
  if (ia == in) return false;
  const auto& anc = ancestors_[in];
  return std::binary_search(anc.begin(), anc.end(), ia);
}

std::vector<SynsetGraph::Edge> SynsetGraph::validate_trimmed(
    const std::set<CategoryId>& categories) const {
  std::vector<Edge> violations;
  for (const auto& i : categories) {
    for (const auto& j : categories) {
      if (i != j && is_proper_ancestor(i, j)) violations.emplace_back(i, j);
    }
  }
  return violations;
}

std::vector<CategoryId> SynsetGraph::descendants_inclusive(const CategoryId& id) const {
  std::vector<bool> seen(names_.size(), false);
  std::vector<std::uint32_t> stack{require(id)};
  seen[stack.back()] = true;
  std::vector<CategoryId> out;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    out.push_back(names_[v]);
    for (auto c : children_[v]) {
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CategoryId> SynsetGraph::leaves() const {
  std::vector<CategoryId> out;
  for (std::size_t v = 0; v < names_.size(); ++v) {
    if (leaf_[v]) out.push_back(names_[v]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SynsetGraph::Edge> SynsetGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t p = 0; p < names_.size(); ++p) {
    for (auto c : children_[p]) out.emplace_back(names_[p], names_[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vrc
