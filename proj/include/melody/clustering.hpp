/*
 * Copyright 2026 The Melody Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "melody/error.hpp"
#include "melody/matrix.hpp"

namespace melody {

using ClusterId = std::uint32_t;

enum class Side { rows, cols };

inline const char* to_string(Side s) { return s == Side::rows ? "row" : "col"; }

struct Cluster {
  ClusterId id = 0;
  std::vector<Index> members;  // sorted ascending

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// A partition of the row indices and a partition of the column indices.
struct Clustering {
  std::vector<Cluster> row_clusters;
  std::vector<Cluster> col_clusters;

  const std::vector<Cluster>& side(Side s) const {
    return s == Side::rows ? row_clusters : col_clusters;
  }
  std::vector<Cluster>& side(Side s) { return s == Side::rows ? row_clusters : col_clusters; }

  static Clustering singletons(std::size_t rows, std::size_t cols) {
    Clustering c;
    for (std::size_t i = 0; i < rows; ++i) {
      c.row_clusters.push_back({static_cast<ClusterId>(i), {static_cast<Index>(i)}});
    }
    for (std::size_t j = 0; j < cols; ++j) {
      c.col_clusters.push_back({static_cast<ClusterId>(j), {static_cast<Index>(j)}});
    }
    return c;
  }

  // Builds clusters from per-index labels; label values become cluster ids.
  static Clustering from_labels(const std::vector<std::size_t>& row_labels,
                                const std::vector<std::size_t>& col_labels) {
    Clustering c;
    auto build = [](const std::vector<std::size_t>& labels, std::vector<Cluster>& out) {
      std::map<std::size_t, std::vector<Index>> groups;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        groups[labels[i]].push_back(static_cast<Index>(i));
      }
      for (auto& [label, members] : groups) {
        out.push_back({static_cast<ClusterId>(label), std::move(members)});
      }
    };
    build(row_labels, c.row_clusters);
    build(col_labels, c.col_clusters);
    return c;
  }

  // Throws ShapeError unless both sides partition their index sets with
  // nonempty clusters and unique ids.
  void validate(std::size_t rows, std::size_t cols) const {
    auto check = [](const std::vector<Cluster>& clusters, std::size_t n, const char* what) {
      std::vector<char> seen(n, 0);
      std::set<ClusterId> ids;
      std::size_t covered = 0;
      for (const auto& c : clusters) {
        if (c.members.empty()) throw ShapeError(std::string(what) + " cluster is empty");
        if (!ids.insert(c.id).second) throw ShapeError(std::string("duplicate ") + what + " cluster id");
        for (auto i : c.members) {
          if (i >= n) throw ShapeError(std::string(what) + " cluster member outside shape");
          if (seen[i]++) throw ShapeError(std::string(what) + " clusters overlap");
          ++covered;
        }
      }
      if (covered != n) throw ShapeError(std::string(what) + " clusters do not cover all indices");
    };
    check(row_clusters, rows, "row");
    check(col_clusters, cols, "column");
  }

  // Position of each index's cluster within side(s).
  std::vector<std::size_t> labels(Side s, std::size_t n) const {
    std::vector<std::size_t> out(n, 0);
    const auto& cs = side(s);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      for (auto i : cs[k].members) out[i] = k;
    }
    return out;
  }

  std::size_t position_of(Side s, ClusterId id) const {
    const auto& cs = side(s);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      if (cs[k].id == id) return k;
    }
    throw NotFound(std::string("unknown ") + to_string(s) + " cluster id " + std::to_string(id));
  }

  // Same partitions with clusters ordered by smallest member and ids 0..k-1.
  Clustering canonical() const {
    Clustering c = *this;
    for (auto* cs : {&c.row_clusters, &c.col_clusters}) {
      for (auto& cl : *cs) std::sort(cl.members.begin(), cl.members.end());
      std::sort(cs->begin(), cs->end(), [](const Cluster& a, const Cluster& b) {
        return a.members.front() < b.members.front();
      });
      for (std::size_t k = 0; k < cs->size(); ++k) (*cs)[k].id = static_cast<ClusterId>(k);
    }
    return c;
  }

  // True when both sides describe the same partitions, ignoring ids and order.
  bool same_partition(const Clustering& other) const {
    return canonical() == other.canonical();
  }

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

}  // namespace melody
