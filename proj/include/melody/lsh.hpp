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

// Euclidean LSH over sparse vectors with a cluster registry.
//
// Every table concatenates `hashes_per_table` p-stable projections
// floor((a . v + b) / w) into one bucket key, so two vectors share a bucket
// in a table only if all of its projections agree. A nearest-cluster query
// unions the buckets of a cluster's members and scores each other cluster by
// the number of its members found, divided by its size.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "melody/clustering.hpp"
#include "melody/error.hpp"
#include "melody/matrix.hpp"

namespace melody {

using SparseVector = std::vector<std::pair<Index, double>>;

struct LshConfig {
  std::size_t n_tables = 8;          // L
  std::size_t hashes_per_table = 4;  // kappa
  double bucket_width = 0.0;         // w; 0 picks half the mean vector norm
  std::uint64_t seed = 0;

  void validate() const {
    if (n_tables < 1) throw ConfigError("lsh: need at least one table");
    if (hashes_per_table < 1) throw ConfigError("lsh: need at least one hash per table");
    if (!(bucket_width >= 0.0) || !std::isfinite(bucket_width)) {
      throw ConfigError("lsh: bucket width must be positive");
    }
  }
};

/// Rows (or columns) of `m` as L1-normalized profile vectors. Profiles make
/// lines of the same block comparable regardless of their total mass.
inline std::vector<SparseVector> profile_vectors(const ExplanationMatrix& m, Side side) {
  std::vector<SparseVector> out(side == Side::rows ? m.rows() : m.cols());
  const auto sums = side == Side::rows ? m.row_sums() : m.col_sums();
  for (const auto& e : m.entries()) {
    const Index line = side == Side::rows ? e.row : e.col;
    const Index dim = side == Side::rows ? e.col : e.row;
    out[line].push_back({dim, e.value / sums[line]});
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

class LshTable {
 public:
  /// Hashes each vector into every table. Entry i starts in cluster i.
  static LshTable build(const std::vector<SparseVector>& vectors, std::size_t dim,
                        const LshConfig& config) {
    config.validate();
    LshTable t;
    t.config_ = config;
    t.dim_ = dim;
    t.width_ = config.bucket_width > 0.0 ? config.bucket_width : default_width(vectors);
    const std::size_t h = config.n_tables * config.hashes_per_table;
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> offset(0.0, t.width_);
    t.proj_.resize(h * dim);
    for (auto& a : t.proj_) a = gauss(rng);
    t.offset_.resize(h);
    for (auto& b : t.offset_) b = offset(rng);

    t.keys_.resize(vectors.size() * config.n_tables);
    t.buckets_.resize(config.n_tables);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      for (std::size_t l = 0; l < config.n_tables; ++l) {
        const auto key = t.key_of(vectors[i], l);
        t.keys_[i * config.n_tables + l] = key;
        t.buckets_[l][key].push_back(static_cast<Index>(i));
      }
    }
    t.cluster_of_.resize(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      t.cluster_of_[i] = static_cast<ClusterId>(i);
      t.members_[static_cast<ClusterId>(i)] = {static_cast<Index>(i)};
    }
    return t;
  }

  /// Replaces the singleton registry with the given clusters.
  void assign(const std::vector<Cluster>& clusters) {
    members_.clear();
    std::vector<char> seen(size(), 0);
    for (const auto& c : clusters) {
      for (auto e : c.members) {
        if (e >= size()) throw NotFound("lsh: entry " + std::to_string(e) + " is not indexed");
        seen[e] = 1;
        cluster_of_[e] = c.id;
      }
      members_[c.id] = c.members;
    }
    if (std::count(seen.begin(), seen.end(), 0) != 0) {
      throw ShapeError("lsh: registry does not cover every entry");
    }
  }

  std::size_t size() const { return cluster_of_.size(); }
  std::size_t n_tables() const { return config_.n_tables; }
  double bucket_width() const { return width_; }

  std::uint64_t key(Index entry, std::size_t table) const {
    check_entry(entry);
    return keys_[entry * config_.n_tables + table];
  }

  ClusterId cluster_of(Index entry) const {
    check_entry(entry);
    return cluster_of_[entry];
  }

  const std::vector<Index>& members(ClusterId id) const {
    auto it = members_.find(id);
    if (it == members_.end()) throw NotFound("lsh: unknown cluster id " + std::to_string(id));
    return it->second;
  }

  /// Entries sharing a bucket with any of `cluster`'s entries in any table,
  /// each reported once, excluding `cluster` itself. Sorted ascending.
  std::vector<Index> query(std::span<const Index> cluster) const {
    std::vector<char> mark(size(), 0);  // 1 = own member, 2 = reported
    for (auto e : cluster) {
      check_entry(e);
      mark[e] = 1;
    }
    std::vector<Index> out;
    std::unordered_set<std::uint64_t> visited;
    for (std::size_t l = 0; l < config_.n_tables; ++l) {
      visited.clear();
      for (auto e : cluster) {
        const auto k = keys_[e * config_.n_tables + l];
        if (!visited.insert(k).second) continue;
        for (auto other : buckets_[l].at(k)) {
          if (mark[other] == 0) {
            mark[other] = 2;
            out.push_back(other);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Up to k clusters ranked by tally = sum over collided entries of
  /// 1 / |cluster|; ties go to the lower id. `candidate` filters the pool.
  template <typename Pred>
  std::vector<std::pair<ClusterId, double>> topk(ClusterId id, std::size_t k, Pred candidate) const {
    if (k < 1) throw ConfigError("lsh: k must be at least 1");
    const auto& own = members(id);
    std::unordered_map<ClusterId, double> tally;
    for (auto e : query(own)) {
      const auto c = cluster_of_[e];
      if (c == id || !candidate(c)) continue;
      tally[c] += 1.0 / static_cast<double>(members_.at(c).size());
    }
    std::vector<std::pair<ClusterId, double>> ranked(tally.begin(), tally.end());
    auto better = [](const auto& x, const auto& y) {
      return x.second != y.second ? x.second > y.second : x.first < y.first;
    };
    const auto keep = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(keep), ranked.end(), better);
    ranked.resize(keep);
    return ranked;
  }

  std::vector<std::pair<ClusterId, double>> topk(ClusterId id, std::size_t k) const {
    return topk(id, k, [](ClusterId) { return true; });
  }

  /// Registry update after the engine folds `absorbed` into `survivor`.
  void on_merge(ClusterId absorbed, ClusterId survivor) {
    if (absorbed == survivor) throw ConfigError("lsh: cannot merge a cluster with itself");
    auto a = members_.find(absorbed);
    auto s = members_.find(survivor);
    if (a == members_.end()) throw NotFound("lsh: unknown cluster id " + std::to_string(absorbed));
    if (s == members_.end()) throw NotFound("lsh: unknown cluster id " + std::to_string(survivor));
    for (auto e : a->second) cluster_of_[e] = survivor;
    s->second.insert(s->second.end(), a->second.begin(), a->second.end());
    members_.erase(a);
  }

 private:
  static double default_width(const std::vector<SparseVector>& vectors) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : vectors) {
      if (v.empty()) continue;
      double sq = 0.0;
      for (const auto& [d, x] : v) sq += x * x;
      sum += std::sqrt(sq);
      ++n;
    }
    return n == 0 || !(sum > 0.0) ? 1.0 : 0.5 * sum / static_cast<double>(n);
  }

  static std::uint64_t mix(std::uint64_t h, std::uint64_t x) {
    // splitmix64 finalizer over the running hash
    std::uint64_t z = h ^ (x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_of(const SparseVector& v, std::size_t table) const {
    std::uint64_t key = 0x5bd1e995ULL + table;
    for (std::size_t j = 0; j < config_.hashes_per_table; ++j) {
      const std::size_t h = table * config_.hashes_per_table + j;
      const double* a = proj_.data() + h * dim_;
      double dot = 0.0;
      for (const auto& [d, x] : v) dot += a[d] * x;
      const auto q = static_cast<std::int64_t>(std::floor((dot + offset_[h]) / width_));
      key = mix(key, static_cast<std::uint64_t>(q));
    }
    return key;
  }

  void check_entry(Index e) const {
    if (e >= cluster_of_.size()) throw NotFound("lsh: entry " + std::to_string(e) + " is not indexed");
  }

  LshConfig config_;
  std::size_t dim_ = 0;
  double width_ = 1.0;
  std::vector<double> proj_;    // [hash][dim]
  std::vector<double> offset_;  // [hash]
  std::vector<std::uint64_t> keys_;  // [entry][table]
  std::vector<std::unordered_map<std::uint64_t, std::vector<Index>>> buckets_;
  std::vector<ClusterId> cluster_of_;
  std::unordered_map<ClusterId, std::vector<Index>> members_;
};

/// LSH index over the rows or columns of a matrix.
inline LshTable build_lsh_table(const ExplanationMatrix& m, Side side, const LshConfig& config) {
  const std::size_t dim = side == Side::rows ? m.cols() : m.rows();
  return LshTable::build(profile_vectors(m, side), dim, config);
}

}  // namespace melody
