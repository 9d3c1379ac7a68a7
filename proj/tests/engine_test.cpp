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

#include <random>
#include <set>

#include "melody/engine.hpp"
#include "melody/planted.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

namespace melody {
namespace {

using testing::worked_example;

TEST(RandomPop, SingleAndEmpty) {
  const auto m = ExplanationMatrix::from_dense({{1.0}});
  EngineState s(m, Clustering::singletons(1, 1), {});
  EXPECT_EQ(random_pop(s, Side::rows), 0u);
  EXPECT_THROW(random_pop(s, Side::rows), EmptyPool);
}

TEST(RandomPop, SeededSequenceRepeats) {
  const auto m = worked_example();
  auto sequence = [&](std::uint64_t seed) {
    EngineConfig c;
    c.seed = seed;
    EngineState s(m, Clustering::singletons(4, 4), c);
    std::vector<ClusterId> out;
    while (!s.active[0].empty()) out.push_back(random_pop(s, Side::rows));
    return out;
  };
  EXPECT_EQ(sequence(3), sequence(3));
  auto seq = sequence(3);
  EXPECT_EQ(std::set<ClusterId>(seq.begin(), seq.end()), (std::set<ClusterId>{0, 1, 2, 3}));
}

TEST(RandomPop, UniformOverFourItems) {
  const auto m = ExplanationMatrix::from_dense({{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}});
  EngineConfig c;
  c.seed = 17;
  EngineState s(m, Clustering::singletons(4, 4), c);
  std::vector<int> counts(4, 0);
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const auto id = random_pop(s, Side::rows);
    ++counts[id];
    s.active[0].push_back(id);
  }
  double chi2 = 0;
  for (int k : counts) {
    EXPECT_NEAR(k / double(n), 0.25, 0.02);
    chi2 += (k - n / 4.0) * (k - n / 4.0) / (n / 4.0);
  }
  // 3 degrees of freedom, 99.9th percentile.
  EXPECT_LT(chi2, 16.27);
}

TEST(Step, FirstRowMergeInsideBlockAccepted) {
  // From singletons, merging r1 with r2 costs no loss, so the gain is beta.
  const auto m = worked_example();
  EngineConfig c;
  c.trace = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    c.seed = seed;
    EngineState s(m, Clustering::singletons(4, 4), c);
    step(s, Side::rows, c);
    const auto& ev = s.trace.back();
    if (ev.popped > 1) continue;
    EXPECT_TRUE(ev.accepted);
    ASSERT_TRUE(ev.candidate);
    EXPECT_EQ(*ev.candidate, 1 - ev.popped);
    const double oracle_gain =
        merge_delta(m, Clustering::singletons(4, 4), Side::rows, 0, 1, 0.05);
    EXPECT_NEAR(oracle_gain, 0.05, 1e-12);
    EXPECT_NEAR(ev.delta, oracle_gain, 1e-12);
    return;
  }
  FAIL() << "no seed popped r1 or r2 first";
}

TEST(Step, OrthogonalRowsRejectedAtZeroBeta) {
  const auto m = ExplanationMatrix::from_dense({{0.5, 0}, {0, 0.5}});
  EngineConfig c;
  c.beta_rows = c.beta_cols = 0;
  EngineState s(m, Clustering::singletons(2, 2), c);
  step(s, Side::rows, c);
  step(s, Side::rows, c);
  EXPECT_TRUE(s.active[0].empty());
  EXPECT_EQ(s.finalized[0].size(), 2u);
  EXPECT_EQ(s.accepted_merges, 0u);
}

TEST(Step, TieGoesToLowestId) {
  // r0 is identical to r1 and r2; the merge gain into either is the same.
  const auto m = ExplanationMatrix::from_dense({{1, 1}, {1, 1}, {1, 1}});
  EngineConfig c;
  c.trace = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    c.seed = seed;
    EngineState s(m, Clustering::singletons(3, 2), c);
    step(s, Side::rows, c);
    const auto& ev = s.trace.back();
    if (ev.popped != 2) continue;
    ASSERT_TRUE(ev.accepted);
    EXPECT_EQ(*ev.candidate, 0u);
    return;
  }
  FAIL();
}

TEST(Summarize, ZeroBetaKeepsSingletons) {
  EngineConfig c;
  c.beta_rows = c.beta_cols = 0;
  const auto r = summarize(worked_example(), c);
  EXPECT_EQ(r.clustering.row_clusters.size(), 4u);
  EXPECT_EQ(r.clustering.col_clusters.size(), 4u);
  EXPECT_NEAR(r.cost.total, 0.0, 1e-12);
}

TEST(Summarize, WorkedExampleFromSingletonsMatchesOracle) {
  // At beta = 0.05 the exhaustive optimum keeps r3/r4 and c3/c4 apart.
  const auto m = worked_example();
  const auto best = oracle::brute_force_optimal(m, 0.05, 0.05);
  EXPECT_EQ(oracle::count_groups(best.row_labels), 3u);
  EXPECT_EQ(oracle::count_groups(best.col_labels), 3u);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EngineConfig c;
    c.seed = seed;
    const auto r = summarize(m, c);
    EXPECT_GE(r.cost.total, best.total - 1e-9);
    EXPECT_NEAR(r.cost.total, best.total, 1e-9) << "seed " << seed;
  }
}

TEST(Summarize, WorkedExampleFromTwoByTwoStaysTwoByTwo) {
  const auto m = worked_example();
  const auto start = testing::worked_example_clustering();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EngineConfig c;
    c.seed = seed;
    const auto r = summarize(m, c, start);
    EXPECT_TRUE(r.clustering.same_partition(start));
  }
}

TEST(Summarize, TraceIsMonotoneAndPartitionSafe) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const auto m = testing::random_sparse(rng, 3 + rng() % 10, 3 + rng() % 10, 0.4);
    for (auto mode : {CandidateMode::exhaustive, CandidateMode::lsh}) {
      EngineConfig c;
      c.seed = t;
      c.trace = true;
      c.candidate_mode = mode;
      c.k_neighbors = 2;
      EngineState s(m, Clustering::singletons(m.rows(), m.cols()), c);
      double last = s.total(c);
      while (!s.active[0].empty() || !s.active[1].empty()) {
        for (auto side : {Side::rows, Side::cols}) {
          if (s.active_list(side).empty()) continue;
          step(s, side, c);
          s.table.clustering().validate(m.rows(), m.cols());
          // Active and finalized lists are disjoint and cover the live ids.
          std::set<ClusterId> listed;
          for (auto id : s.active_list(side)) EXPECT_TRUE(listed.insert(id).second);
          for (auto id : s.final_list(side)) EXPECT_TRUE(listed.insert(id).second);
          const auto ids = s.table.ids(side);
          EXPECT_EQ(listed, std::set<ClusterId>(ids.begin(), ids.end()));
          const double now = s.trace.back().total;
          EXPECT_LE(now, last + 1e-9);
          if (!s.trace.back().accepted) EXPECT_NEAR(now, last, 1e-12);
          if (mode == CandidateMode::lsh) EXPECT_LE(s.trace.back().candidate ? 1u : 0u, c.k_neighbors);
          last = now;
        }
      }
      EXPECT_LE(s.iterations, 2 * (m.rows() + m.cols()));
    }
  }
}

TEST(Summarize, Deterministic) {
  std::mt19937_64 rng(12);
  const auto m = testing::random_sparse(rng, 20, 15, 0.3);
  for (auto mode : {CandidateMode::exhaustive, CandidateMode::lsh}) {
    EngineConfig c;
    c.seed = 99;
    c.trace = true;
    c.candidate_mode = mode;
    const auto a = summarize(m, c);
    const auto b = summarize(m, c);
    EXPECT_EQ(a.clustering, b.clustering);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.cost.total, b.cost.total);
  }
}

TEST(Summarize, IterationCapCarriesPartialResult) {
  EngineConfig c;
  c.max_iterations = 3;
  try {
    summarize(worked_example(), c);
    FAIL();
  } catch (const IterationCap& e) {
    EXPECT_EQ(e.partial().iterations, 3u);
    e.partial().clustering.validate(4, 4);
  }
}

TEST(Summarize, RejectsBadConfig) {
  EngineConfig c;
  c.beta_rows = -1;
  EXPECT_THROW(summarize(worked_example(), c), ConfigError);
  c = {};
  c.k_neighbors = 0;
  EXPECT_THROW(summarize(worked_example(), c), ConfigError);
}

TEST(Summarize, ExhaustiveEvaluationCountIsQuadratic) {
  // Orthogonal rows and columns with beta = 0: nothing ever merges, so
  // every pop scans every other cluster.
  const std::size_t n = 12;
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 1.0;
  EngineConfig c;
  c.beta_rows = c.beta_cols = 0;
  const auto r = summarize(ExplanationMatrix::from_dense(d), c);
  EXPECT_EQ(r.evaluations, 2 * n * (n - 1));
  EXPECT_EQ(r.accepted_merges, 0u);
}

TEST(Summarize, NeverBelowOracleOnSmallMatrices) {
  std::mt19937_64 rng(31);
  int close = 0;
  const int runs = 40;
  for (int t = 0; t < runs; ++t) {
    const auto m = testing::random_sparse(rng, 2 + rng() % 4, 2 + rng() % 4, 0.5);
    EngineConfig c;
    c.seed = t;
    const auto r = summarize(m, c);
    const auto best = oracle::brute_force_optimal(m, c.beta_rows, c.beta_cols);
    EXPECT_GE(r.cost.total, best.total - 1e-9);
    if (r.cost.total <= 1.05 * best.total + 1e-12) ++close;
  }
  EXPECT_GE(close, runs * 9 / 10);
}

TEST(BruteForce, TrivialCases) {
  const auto one = oracle::brute_force_optimal(ExplanationMatrix::from_dense({{1.0}}), 0.05, 0.05);
  EXPECT_EQ(one.row_labels, std::vector<std::size_t>{0});
  const auto id3 = oracle::brute_force_optimal(
      ExplanationMatrix::from_dense({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 0, 0);
  EXPECT_EQ(id3.row_labels, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(id3.col_labels, (std::vector<std::size_t>{0, 1, 2}));
  std::vector<std::vector<double>> big(8, std::vector<double>(2, 1.0));
  EXPECT_THROW(oracle::brute_force_optimal(ExplanationMatrix::from_dense(big), 0, 0), TooLarge);
}

TEST(Summarize, LshRecoversPlantedBlocks) {
  PlantedConfig pc;
  pc.rows = 300;
  pc.cols = 60;
  pc.blocks = 3;
  pc.noise = 0.0;
  pc.seed = 2;
  const auto planted = make_planted(pc);
  EngineConfig c;
  c.candidate_mode = CandidateMode::lsh;
  c.seed = 1;
  const auto r = summarize(planted.matrix, c);
  const auto rl = oracle::labels_of(r.clustering.row_clusters, pc.rows);
  EXPECT_GE(oracle::adjusted_rand_index(rl, planted.row_labels), 0.9);
}

}  // namespace
}  // namespace melody
