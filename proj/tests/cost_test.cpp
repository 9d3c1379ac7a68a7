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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "melody/cost.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

namespace melody {
namespace {

using testing::random_labels;
using testing::random_sparse;
using testing::worked_example;
using testing::worked_example_clustering;

TEST(Marginals, WorkedExampleBlocks) {
  const auto mg = marginals(worked_example(), worked_example_clustering());
  EXPECT_NEAR(mg.block(0, 0), 0.4, 1e-12);
  EXPECT_NEAR(mg.block(1, 1), 0.6, 1e-12);
  EXPECT_EQ(mg.block(0, 1), 0.0);
  EXPECT_EQ(mg.block(1, 0), 0.0);
}

TEST(ApproxEntry, WorkedExampleCells) {
  const auto mg = marginals(worked_example(), worked_example_clustering());
  // Hand-derived: p(r3)=0.4, p(r4)=0.2, p(c3)=0.2, p(c4)=0.4, block 0.6.
  EXPECT_NEAR(approx_entry(mg, 2, 3), 0.6 * (0.4 / 0.6) * (0.4 / 0.6), 1e-12);
  EXPECT_NEAR(approx_entry(mg, 3, 2), 0.6 * (0.2 / 0.6) * (0.2 / 0.6), 1e-12);
  EXPECT_NEAR(approx_entry(mg, 2, 2), 0.6 * (0.4 / 0.6) * (0.2 / 0.6), 1e-12);
  EXPECT_NEAR(approx_entry(mg, 3, 3), approx_entry(mg, 2, 2), 1e-12);
  EXPECT_NEAR(approx_entry(mg, 2, 3), 0.2667, 5e-5);
  EXPECT_NEAR(approx_entry(mg, 3, 2), 0.0667, 5e-5);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(approx_entry(mg, i, j), 0.1, 1e-12);
}

TEST(ApproxEntry, OutsideShape) {
  const auto mg = marginals(worked_example(), worked_example_clustering());
  EXPECT_THROW(approx_entry(mg, 4, 0), ShapeError);
}

TEST(ApproxEntry, ZeroMassCluster) {
  // Row r2 is empty, so its singleton cluster has no mass.
  const auto m = ExplanationMatrix::from_dense({{0.5, 0.5}, {0, 0}});
  const auto mg = marginals(m, Clustering::singletons(2, 2));
  EXPECT_THROW(approx_entry(mg, 1, 0), ZeroMass);
}

TEST(KlDivergence, Basics) {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  EXPECT_NEAR(kl_divergence(p, q), 0.5 * std::log2(2.0) + 0.5 * std::log2(0.5 / 0.75), 1e-15);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_THROW(kl_divergence(p, std::vector<double>{1.0, 0.0}), InfiniteDivergence);
  EXPECT_THROW(kl_divergence(p, std::vector<double>{1.0}), ShapeError);
}

TEST(MarginalLoss, WorkedExample) {
  const auto m = worked_example();
  const auto c = worked_example_clustering();
  const double expected = oracle::loss(oracle::to_dense(m), {0, 0, 1, 1}, {0, 0, 1, 1});
  const auto d = marginal_loss(m, c);
  EXPECT_NEAR(d.loss, expected, 1e-12);
  EXPECT_NEAR(d.loss, 0.5030, 5e-4);
  // Only the second row/column cluster carries error.
  EXPECT_NEAR(d.row_slices.at(0), 0.0, 1e-15);
  EXPECT_NEAR(d.col_slices.at(0), 0.0, 1e-15);
  EXPECT_NEAR(d.row_slices.at(1), d.col_slices.at(1), 1e-12);
}

TEST(MarginalLoss, WorkedExampleWholeKl) {
  const auto m = worked_example();
  const auto c = worked_example_clustering();
  const auto p = oracle::to_dense(m);
  const double whole = oracle::loss(p, {0, 0, 1, 1}, {0, 0, 1, 1}, oracle::Reading::whole);
  EXPECT_NEAR(marginal_loss(m, c, LossKind::whole_kl).loss, whole, 1e-12);
  EXPECT_NEAR(marginal_loss(m, c, LossKind::raw).loss, 2 * whole, 1e-12);
  // The restriction reading is the raw kind: every cell is counted on both sides.
  EXPECT_NEAR(oracle::loss(p, {0, 0, 1, 1}, {0, 0, 1, 1}, oracle::Reading::restriction), 2 * whole, 1e-12);
}

TEST(TotalCost, WorkedExample) {
  const auto m = worked_example();
  const auto t = total_cost(m, worked_example_clustering(), 0.05, 0.05);
  EXPECT_NEAR(t.model_cost, 0.2, 1e-15);
  EXPECT_NEAR(t.total, 0.2 + t.loss, 1e-15);
  EXPECT_THROW(total_cost(m, worked_example_clustering(), -1, 0), ConfigError);
}

TEST(TotalCost, SingletonsAreLossless) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_sparse(rng, 2 + rng() % 8, 2 + rng() % 8, 0.5);
    EXPECT_NEAR(marginal_loss(m, Clustering::singletons(m.rows(), m.cols())).loss, 0.0, 1e-12);
  }
}

TEST(TotalCost, RejectsInvalidClustering) {
  const auto m = worked_example();
  EXPECT_THROW(total_cost(m, Clustering::from_labels({0, 0, 1}, {0, 0, 1, 1}), 0, 0), ShapeError);
}

// Random matrices and clusterings over which the two routes and the oracle
// must agree. Empty rows/columns are allowed; clusters may have zero mass.
struct Case {
  ExplanationMatrix m;
  std::vector<std::size_t> rl, cl;
};

Case random_case(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  auto mat = random_sparse(rng, m, n, 0.45);
  auto rl = random_labels(rng, m, 1 + rng() % m);
  auto cl = random_labels(rng, n, 1 + rng() % n);
  return {std::move(mat), rl, cl};
}

TEST(CostRoutes, AgreeWithOracle) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 100; ++t) {
    auto [m, rl, cl] = random_case(rng, 1 + rng() % 8, 1 + rng() % 8);
    const auto c = Clustering::from_labels(rl, cl);
    const auto p = oracle::to_dense(m);
    // Relabel densely so the oracle's group count matches.
    const auto drl = c.labels(Side::rows, m.rows());
    const auto dcl = c.labels(Side::cols, m.cols());
    for (auto kind : {LossKind::marginal, LossKind::raw, LossKind::whole_kl}) {
      const auto reading = kind == LossKind::marginal ? oracle::Reading::conditional
                           : kind == LossKind::raw    ? oracle::Reading::restriction
                                                      : oracle::Reading::whole;
      const double expect = oracle::loss(p, drl, dcl, reading);
      EXPECT_NEAR(marginal_loss(m, c, kind).loss, expect, 1e-9);
      const CoClusterTable table(m, c, kind);
      EXPECT_NEAR(table.loss(), expect, 1e-9);
      EXPECT_NEAR(table.loss_from_blocks(), expect, 1e-9);
    }
  }
}

TEST(CostInvariants, NonnegativeAndZeroAtSingletons) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 50; ++t) {
    auto [m, rl, cl] = random_case(rng, 8, 8);
    EXPECT_GE(marginal_loss(m, Clustering::from_labels(rl, cl)).loss, 0.0);
  }
}

TEST(CostInvariants, RowColumnSymmetry) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto [m, rl, cl] = random_case(rng, 8, 8);
    std::vector<Entry> te;
    for (const auto& e : m.entries()) te.push_back({e.col, e.row, e.value});
    const ExplanationMatrix mt(m.cols(), m.rows(), te);
    const double a = total_cost(m, Clustering::from_labels(rl, cl), 0.1, 0.3).total;
    const double b = total_cost(mt, Clustering::from_labels(cl, rl), 0.3, 0.1).total;
    EXPECT_NEAR(a, b, 1e-9);
  }
}

TEST(CostInvariants, IncrementalMergeMatchesRecompute) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 50; ++t) {
    auto [m, rl, cl] = random_case(rng, 8, 8);
    auto c = Clustering::from_labels(rl, cl);
    const double beta = 0.05;
    for (auto side : {Side::rows, Side::cols}) {
      const auto& cs = c.side(side);
      if (cs.size() < 2) continue;
      for (std::size_t x = 0; x < cs.size(); ++x)
        for (std::size_t y = x + 1; y < cs.size(); ++y) {
          const auto a = cs[x].id, b = cs[y].id;
          // Full recompute of T before and after via the oracle.
          auto merged = c;
          auto& ms = merged.side(side);
          auto& dst = ms[y].members;
          dst.insert(dst.end(), ms[x].members.begin(), ms[x].members.end());
          std::sort(dst.begin(), dst.end());
          ms.erase(ms.begin() + long(x));
          const auto p = oracle::to_dense(m);
          const double before = oracle::total(p, c.labels(Side::rows, 8), c.labels(Side::cols, 8),
                                              side == Side::rows ? beta : 0, side == Side::cols ? beta : 0);
          const double after =
              oracle::total(p, merged.labels(Side::rows, 8), merged.labels(Side::cols, 8),
                            side == Side::rows ? beta : 0, side == Side::cols ? beta : 0);
          EXPECT_NEAR(merge_delta(m, c, side, a, b, beta), before - after, 1e-9);
          EXPECT_NEAR(merge_delta(m, c, side, b, a, beta), before - after, 1e-9);
        }
    }
  }
}

TEST(CoClusterTable, MergeKeepsStatisticsConsistent) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto m = random_sparse(rng, 10, 9, 0.35);
    for (auto kind : {LossKind::marginal, LossKind::raw, LossKind::whole_kl}) {
      CoClusterTable table(m, Clustering::singletons(10, 9), kind);
      std::mt19937_64 pick(t);
      while (table.count(Side::rows) > 1 || table.count(Side::cols) > 1) {
        const auto side = table.count(Side::rows) > 1 && (pick() % 2 == 0 || table.count(Side::cols) == 1)
                              ? Side::rows
                              : Side::cols;
        const auto ids = table.ids(side);
        const auto a = ids[pick() % ids.size()];
        auto b = ids[pick() % ids.size()];
        if (a == b) continue;
        const double before = table.loss();
        const double predicted = table.loss_increase(side, a, b);
        table.merge(side, a, b);
        EXPECT_FALSE(table.contains(side, a));
        EXPECT_TRUE(table.contains(side, b));
        EXPECT_NEAR(table.loss() - before, predicted, 1e-9);
        EXPECT_NEAR(table.loss(), table.loss_from_blocks(), 1e-9);
        EXPECT_NEAR(table.loss(), marginal_loss(m, table.clustering(), kind).loss, 1e-9);
      }
    }
  }
}

TEST(CoClusterTable, MergeSelfAndUnknown) {
  CoClusterTable table(worked_example(), Clustering::singletons(4, 4));
  EXPECT_THROW(table.merge_delta(Side::rows, 1, 1, 0.1), ConfigError);
  EXPECT_THROW(table.merge_delta(Side::rows, 1, 42, 0.1), NotFound);
}

TEST(MergeDelta, WorkedExampleInsideBlock) {
  // Merging r1 and r2 from the 2x2 start loses nothing: identical profiles.
  const auto m = worked_example();
  const auto c = Clustering::from_labels({0, 1, 2, 2}, {0, 0, 1, 1});
  EXPECT_NEAR(merge_delta(m, c, Side::rows, 0, 1, 0.05), 0.05, 1e-12);
}

}  // namespace
}  // namespace melody
