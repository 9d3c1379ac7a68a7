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

// Information-theoretic summary objective.
//
// A clustering compresses the joint distribution p(r, c) into co-cluster
// masses p(R^, C^). The approximation it implies is
//
//   q(r, c) = p(r^, c^) * p(r) / p(r^) * p(c) / p(c^)
//
// and the loss D sums, over every row cluster and every column cluster, the
// KL divergence (bits) between the slice of p and the slice of q restricted
// to that cluster. Slices are conditioned on their mass by default so each
// cluster weighs equally. The total MDL cost is
//
//   T = beta_r * |R^| + beta_c * |C^| + D.
//
// Two routes compute D: marginal_loss() walks the entries through
// approx_entry(), and CoClusterTable keeps per-block sufficient statistics
// so that merge deltas cost O(blocks of the two clusters).

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <unordered_map>
#include <vector>

#include "melody/clustering.hpp"
#include "melody/matrix.hpp"

namespace melody {

enum class LossKind {
  marginal,  // per-slice KL of conditional slice distributions (default)
  raw,       // per-slice KL of unnormalized restrictions (= 2x whole-matrix KL)
  whole_kl,  // plain KL over the whole matrix
};

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::marginal: return "marginal";
    case LossKind::raw: return "raw";
    case LossKind::whole_kl: return "kl";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "marginal") return LossKind::marginal;
  if (s == "raw") return LossKind::raw;
  if (s == "kl") return LossKind::whole_kl;
  throw ConfigError("unknown loss kind '" + s + "' (expected marginal|raw|kl)");
}

struct Marginals {
  std::vector<double> p_rows;
  std::vector<double> p_cols;
  std::vector<double> p_row_clusters;  // by position in Clustering::row_clusters
  std::vector<double> p_col_clusters;
  std::vector<std::size_t> row_label;  // index -> cluster position
  std::vector<std::size_t> col_label;
  std::vector<std::map<std::size_t, double>> p_hat;  // [row pos][col pos] -> mass

  double block(std::size_t a, std::size_t b) const {
    auto it = p_hat[a].find(b);
    return it == p_hat[a].end() ? 0.0 : it->second;
  }
};

inline Marginals marginals(const ExplanationMatrix& m, const Clustering& clustering) {
  clustering.validate(m.rows(), m.cols());
  Marginals out;
  out.p_rows = m.row_sums();
  out.p_cols = m.col_sums();
  out.row_label = clustering.labels(Side::rows, m.rows());
  out.col_label = clustering.labels(Side::cols, m.cols());
  out.p_row_clusters.assign(clustering.row_clusters.size(), 0.0);
  out.p_col_clusters.assign(clustering.col_clusters.size(), 0.0);
  out.p_hat.assign(clustering.row_clusters.size(), {});
  for (const auto& e : m.entries()) {
    const auto a = out.row_label[e.row];
    const auto b = out.col_label[e.col];
    out.p_row_clusters[a] += e.value;
    out.p_col_clusters[b] += e.value;
    out.p_hat[a][b] += e.value;
  }
  return out;
}

/// q(r, c) for any cell, including cells where p is zero.
inline double approx_entry(const Marginals& mg, std::size_t r, std::size_t c) {
  if (r >= mg.p_rows.size() || c >= mg.p_cols.size()) throw ShapeError("cell outside matrix");
  const auto a = mg.row_label[r];
  const auto b = mg.col_label[c];
  const double pr = mg.p_row_clusters[a];
  const double pc = mg.p_col_clusters[b];
  if (!(pr > 0.0) || !(pc > 0.0)) {
    throw ZeroMass("cell (" + std::to_string(r) + ", " + std::to_string(c) +
                   ") lies in a zero-mass cluster");
  }
  return mg.block(a, b) * (mg.p_rows[r] / pr) * (mg.p_cols[c] / pc);
}

/// KL(p || q) in bits over aligned outcome arrays; 0 log 0 = 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("kl_divergence: distributions differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (!(q[i] > 0.0)) throw InfiniteDivergence();
    sum += p[i] * std::log2(p[i] / q[i]);
  }
  return sum;
}

struct CostBreakdown {
  double model_cost = 0.0;  // bits
  double loss = 0.0;        // bits
  double total = 0.0;       // bits
  std::map<ClusterId, double> row_slices;  // slice loss by row cluster id
  std::map<ClusterId, double> col_slices;
};

namespace detail {

// Rounding can leave a mathematically nonnegative KL sum a hair below zero.
inline double clamp_rounding(double v) { return (v < 0.0 && v > -1e-12) ? 0.0 : v; }

}  // namespace detail

/// Loss D through the entry-wise route. `model_cost` and `total` are left at
/// zero/loss; use total_cost() for the full breakdown.
inline CostBreakdown marginal_loss(const ExplanationMatrix& m, const Clustering& clustering,
                                   LossKind kind = LossKind::marginal) {
  const auto mg = marginals(m, clustering);
  std::vector<double> row_kl(clustering.row_clusters.size(), 0.0);
  std::vector<double> col_kl(clustering.col_clusters.size(), 0.0);
  for (const auto& e : m.entries()) {
    const double q = approx_entry(mg, e.row, e.col);
    if (!(q > 0.0)) throw InfiniteDivergence();
    const double t = e.value * std::log2(e.value / q);
    row_kl[mg.row_label[e.row]] += t;
    col_kl[mg.col_label[e.col]] += t;
  }
  CostBreakdown out;
  auto slice = [&](double kl, double mass) {
    if (!(mass > 0.0)) return 0.0;  // empty slice
    return detail::clamp_rounding(kind == LossKind::marginal ? kl / mass : kl);
  };
  for (std::size_t a = 0; a < row_kl.size(); ++a) {
    const double v = slice(row_kl[a], mg.p_row_clusters[a]);
    out.row_slices[clustering.row_clusters[a].id] = v;
    out.loss += v;
  }
  for (std::size_t b = 0; b < col_kl.size(); ++b) {
    const double v = slice(col_kl[b], mg.p_col_clusters[b]);
    out.col_slices[clustering.col_clusters[b].id] = v;
    if (kind != LossKind::whole_kl) out.loss += v;
  }
  out.total = out.loss;
  return out;
}

inline CostBreakdown total_cost(const ExplanationMatrix& m, const Clustering& clustering,
                                double beta_rows, double beta_cols,
                                LossKind kind = LossKind::marginal) {
  if (!(beta_rows >= 0.0) || !(beta_cols >= 0.0)) {
    throw ConfigError("cluster penalties must be nonnegative");
  }
  auto out = marginal_loss(m, clustering, kind);
  out.model_cost = beta_rows * static_cast<double>(clustering.row_clusters.size()) +
                   beta_cols * static_cast<double>(clustering.col_clusters.size());
  out.total = out.model_cost + out.loss;
  return out;
}

/// Co-cluster sufficient statistics supporting O(blocks) merge deltas.
///
/// For every nonempty co-cluster (a, b) the table keeps its mass M and
/// S = sum p ln(p / (p(r) p(c))). Both are additive under merges, and the
/// block's KL contribution is K = S - M ln(M / (P_a P_b)). Merging a and b
/// changes K on a shared block by f(M_a, P_a) + f(M_b, P_b) - f(M_u, P_u)
/// with f(M, P) = M ln(M / P), and by M ln(P_u / P_a) on a block only a
/// touches; nothing else moves. Internals are in nats.
class CoClusterTable {
 public:
  CoClusterTable(const ExplanationMatrix& m, const Clustering& clustering,
                 LossKind kind = LossKind::marginal)
      : kind_(kind) {
    clustering.validate(m.rows(), m.cols());
    const auto p_rows = m.row_sums();
    const auto p_cols = m.col_sums();
    const auto row_label = clustering.labels(Side::rows, m.rows());
    const auto col_label = clustering.labels(Side::cols, m.cols());
    for (int s = 0; s < 2; ++s) {
      const auto& cs = clustering.side(static_cast<Side>(s));
      auto& st = sides_[s];
      st.groups.resize(cs.size());
      for (std::size_t k = 0; k < cs.size(); ++k) {
        st.groups[k].id = cs[k].id;
        st.groups[k].members = cs[k].members;
        std::sort(st.groups[k].members.begin(), st.groups[k].members.end());
        st.slot.emplace(cs[k].id, static_cast<std::uint32_t>(k));
      }
      st.alive = cs.size();
    }
    struct Cell {
      std::uint32_t a, b;
      double mass, s;
    };
    std::vector<Cell> cells;
    cells.reserve(m.nnz());
    for (const auto& e : m.entries()) {
      const double s = e.value * std::log(e.value / (p_rows[e.row] * p_cols[e.col]));
      cells.push_back({static_cast<std::uint32_t>(row_label[e.row]),
                       static_cast<std::uint32_t>(col_label[e.col]), e.value, s});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
      return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    auto& rows = sides_[0].groups;
    auto& cols = sides_[1].groups;
    for (std::size_t k = 0; k < cells.size();) {
      Block blk{cells[k].b, 0.0, 0.0};
      const auto a = cells[k].a;
      for (; k < cells.size() && cells[k].a == a && cells[k].b == blk.other; ++k) {
        blk.mass += cells[k].mass;
        blk.s += cells[k].s;
      }
      rows[a].blocks.push_back(blk);
      rows[a].mass += blk.mass;
      cols[blk.other].blocks.push_back({a, blk.mass, blk.s});
      cols[blk.other].mass += blk.mass;
    }
    // Column-side blocks arrive ordered by row slot already.
    for (int s = 0; s < 2; ++s) {
      for (auto& g : sides_[s].groups) g.k_sum = block_k_sum(static_cast<Side>(s), g);
    }
  }

  LossKind loss_kind() const { return kind_; }

  std::size_t count(Side side) const { return sides_[idx(side)].alive; }

  bool contains(Side side, ClusterId id) const {
    return sides_[idx(side)].slot.count(id) != 0;
  }

  double mass(Side side, ClusterId id) const { return group(side, id).mass; }
  const std::vector<Index>& members(Side side, ClusterId id) const { return group(side, id).members; }
  std::size_t block_count(Side side, ClusterId id) const { return group(side, id).blocks.size(); }

  std::vector<ClusterId> ids(Side side) const {
    std::vector<ClusterId> out;
    for (const auto& g : sides_[idx(side)].groups) {
      if (g.alive) out.push_back(g.id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Current D in bits from the cached per-cluster sums.
  double loss() const {
    double total = 0.0;
    for (int s = 0; s < 2; ++s) {
      if (kind_ == LossKind::whole_kl && s == 1) break;
      for (const auto& g : sides_[s].groups) {
        if (g.alive) total += weight(g.mass) * g.k_sum;
      }
    }
    return detail::clamp_rounding(total / std::numbers::ln2);
  }

  /// D recomputed from the block statistics, bypassing cached sums.
  double loss_from_blocks() const {
    double total = 0.0;
    for (int s = 0; s < 2; ++s) {
      if (kind_ == LossKind::whole_kl && s == 1) break;
      for (const auto& g : sides_[s].groups) {
        if (g.alive) total += weight(g.mass) * block_k_sum(static_cast<Side>(s), g);
      }
    }
    return detail::clamp_rounding(total / std::numbers::ln2);
  }

  /// D(after merging a and b) - D(now), in bits.
  double loss_increase(Side side, ClusterId a, ClusterId b) const {
    if (a == b) throw ConfigError("cannot merge a cluster with itself");
    const auto& ga = group(side, a);
    const auto& gb = group(side, b);
    const auto walk = walk_merge(side, ga, gb, nullptr);
    const double pu = ga.mass + gb.mass;
    double delta = 0.0;
    switch (kind_) {
      case LossKind::marginal:
        delta = weight(pu) * (ga.k_sum + gb.k_sum + walk.dsum) - weight(ga.mass) * ga.k_sum -
                weight(gb.mass) * gb.k_sum + walk.dcross;
        break;
      case LossKind::raw: delta = 2.0 * walk.dsum; break;
      case LossKind::whole_kl: delta = walk.dsum; break;
    }
    return delta / std::numbers::ln2;
  }

  /// Cost reduction of merging: beta - (D_after - D_before).
  double merge_delta(Side side, ClusterId a, ClusterId b, double beta) const {
    return beta - loss_increase(side, a, b);
  }

  /// Folds `absorbed` into `survivor`; the survivor keeps its id.
  void merge(Side side, ClusterId absorbed, ClusterId survivor) {
    if (absorbed == survivor) throw ConfigError("cannot merge a cluster with itself");
    auto& st = sides_[idx(side)];
    const auto sa = slot_of(side, absorbed);
    const auto su = slot_of(side, survivor);
    auto& ga = st.groups[sa];
    auto& gu = st.groups[su];
    std::vector<Block> merged;
    walk_merge(side, ga, gu, &merged, &sides_[1 - idx(side)].groups);

    // Cross-side bookkeeping: move the absorbed cluster's blocks onto the
    // survivor in every touched cluster of the other side.
    auto& other = sides_[1 - idx(side)].groups;
    for (const auto& blk : ga.blocks) {
      auto& g = other[blk.other];
      auto it = find_block(g.blocks, sa);
      const Block moved = *it;
      g.blocks.erase(it);
      auto jt = find_block_or_insert_pos(g.blocks, su);
      if (jt != g.blocks.end() && jt->other == su) {
        jt->mass += moved.mass;
        jt->s += moved.s;
      } else {
        g.blocks.insert(jt, Block{su, moved.mass, moved.s});
      }
    }

    const double pu = ga.mass + gu.mass;
    std::vector<Index> members;
    members.reserve(ga.members.size() + gu.members.size());
    std::merge(ga.members.begin(), ga.members.end(), gu.members.begin(), gu.members.end(),
               std::back_inserter(members));
    gu.members = std::move(members);
    gu.mass = pu;
    gu.blocks = std::move(merged);
    gu.k_sum = block_k_sum(side, gu);

    ga.alive = false;
    ga.blocks.clear();
    ga.blocks.shrink_to_fit();
    ga.members.clear();
    ga.k_sum = 0.0;
    ga.mass = 0.0;
    st.slot.erase(absorbed);
    --st.alive;
  }

  Clustering clustering() const {
    Clustering c;
    for (int s = 0; s < 2; ++s) {
      auto& out = c.side(static_cast<Side>(s));
      for (const auto& g : sides_[s].groups) {
        if (g.alive) out.push_back({g.id, g.members});
      }
      std::sort(out.begin(), out.end(),
                [](const Cluster& x, const Cluster& y) { return x.id < y.id; });
    }
    return c;
  }

 private:
  struct Block {
    std::uint32_t other;  // slot on the other side
    double mass;
    double s;
  };
  struct Group {
    ClusterId id = 0;
    std::vector<Index> members;
    std::vector<Block> blocks;  // sorted by `other`
    double mass = 0.0;
    double k_sum = 0.0;  // sum of block K over this cluster's blocks, nats
    bool alive = true;
  };
  struct SideState {
    std::vector<Group> groups;
    std::unordered_map<ClusterId, std::uint32_t> slot;
    std::size_t alive = 0;
  };
  struct Walk {
    double dsum = 0.0;    // sum of per-block K changes
    double dcross = 0.0;  // same, weighted by the other side's slice weight
  };

  static int idx(Side s) { return s == Side::rows ? 0 : 1; }

  double weight(double mass) const {
    if (kind_ != LossKind::marginal) return 1.0;
    return mass > 0.0 ? 1.0 / mass : 0.0;
  }

  static double block_k(double mass, double s, double pa, double pb) {
    return s - mass * std::log(mass / (pa * pb));
  }

  double block_k_sum(Side side, const Group& g) const {
    const auto& other = sides_[1 - idx(side)].groups;
    double sum = 0.0;
    for (const auto& b : g.blocks) sum += block_k(b.mass, b.s, g.mass, other[b.other].mass);
    return sum;
  }

  std::uint32_t slot_of(Side side, ClusterId id) const {
    const auto& st = sides_[idx(side)];
    auto it = st.slot.find(id);
    if (it == st.slot.end()) {
      throw NotFound(std::string("unknown ") + to_string(side) + " cluster id " + std::to_string(id));
    }
    return it->second;
  }

  const Group& group(Side side, ClusterId id) const {
    return sides_[idx(side)].groups[slot_of(side, id)];
  }

  static std::vector<Block>::iterator find_block_or_insert_pos(std::vector<Block>& blocks,
                                                               std::uint32_t other) {
    return std::lower_bound(blocks.begin(), blocks.end(), other,
                            [](const Block& b, std::uint32_t o) { return b.other < o; });
  }

  static std::vector<Block>::iterator find_block(std::vector<Block>& blocks, std::uint32_t other) {
    auto it = find_block_or_insert_pos(blocks, other);
    if (it == blocks.end() || it->other != other) throw std::logic_error("co-cluster table out of sync");
    return it;
  }

  // Merge-walks the two block lists and accumulates the K changes. Optionally
  // emits the merged block list and applies the changes to the other side's
  // cached sums.
  Walk walk_merge(Side side, const Group& ga, const Group& gb, std::vector<Block>* out,
                  std::vector<Group>* apply_to = nullptr) const {
    const auto& other = sides_[1 - idx(side)].groups;
    const double pa = ga.mass, pb = gb.mass, pu = pa + pb;
    const double ln_a = pa > 0.0 ? std::log(pu / pa) : 0.0;
    const double ln_b = pb > 0.0 ? std::log(pu / pb) : 0.0;
    auto f = [](double m, double p) { return m * std::log(m / p); };
    Walk w;
    if (out) out->reserve(ga.blocks.size() + gb.blocks.size());
    auto emit = [&](std::uint32_t o, double dk, double mass, double s) {
      w.dsum += dk;
      w.dcross += weight(other[o].mass) * dk;
      if (out) out->push_back({o, mass, s});
      if (apply_to) (*apply_to)[o].k_sum += dk;
    };
    std::size_t i = 0, j = 0;
    const auto& A = ga.blocks;
    const auto& B = gb.blocks;
    while (i < A.size() || j < B.size()) {
      if (j == B.size() || (i < A.size() && A[i].other < B[j].other)) {
        emit(A[i].other, A[i].mass * ln_a, A[i].mass, A[i].s);
        ++i;
      } else if (i == A.size() || B[j].other < A[i].other) {
        emit(B[j].other, B[j].mass * ln_b, B[j].mass, B[j].s);
        ++j;
      } else {
        const double mu = A[i].mass + B[j].mass;
        emit(A[i].other, f(A[i].mass, pa) + f(B[j].mass, pb) - f(mu, pu), mu, A[i].s + B[j].s);
        ++i;
        ++j;
      }
    }
    return w;
  }

  LossKind kind_;
  SideState sides_[2];
};

/// Cost reduction T(clustering) - T(clustering with a and b merged).
inline double merge_delta(const ExplanationMatrix& m, const Clustering& clustering, Side side,
                          ClusterId a, ClusterId b, double beta,
                          LossKind kind = LossKind::marginal) {
  if (!(beta >= 0.0)) throw ConfigError("cluster penalty must be nonnegative");
  CoClusterTable table(m, clustering, kind);
  return table.merge_delta(side, a, b, beta);
}

}  // namespace melody
