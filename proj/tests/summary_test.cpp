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
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "melody/summary.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

namespace melody {
namespace {

Summary worked_summary() {
  const auto m = testing::worked_example();
  const auto c = testing::worked_example_clustering();
  return build_summary(m, c, total_cost(m, c, 0.05, 0.05));
}

// 20x10 with three classes and some misclassified rows.
ExplanationMatrix labelled(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto base = testing::random_sparse(rng, 20, 10, 0.3);
  auto rows = default_row_meta(20);
  const char* classes[] = {"cat", "dog", "eel"};
  for (std::size_t i = 0; i < 20; ++i) {
    rows[i].label = classes[i % 3];
    rows[i].correct = (i % 4) != 0;
    rows[i].predicted = rows[i].correct ? rows[i].label : classes[(i + 1) % 3];
  }
  return ExplanationMatrix(20, 10, {base.entries().begin(), base.entries().end()}, rows);
}

Summary labelled_summary(std::uint64_t seed) {
  const auto m = labelled(seed);
  std::mt19937_64 rng(seed + 100);
  const auto c = Clustering::from_labels(testing::random_labels(rng, 20, 4), testing::random_labels(rng, 10, 3));
  return build_summary(m, c, total_cost(m, c, 0.05, 0.05));
}

TEST(Summary, WorkedExampleBlocks) {
  const auto s = worked_summary();
  ASSERT_EQ(s.blocks.size(), 2u);
  EXPECT_EQ(s.blocks[0].r, 1u);
  EXPECT_EQ(s.blocks[0].c, 1u);
  EXPECT_DOUBLE_EQ(s.blocks[0].mass, 0.4);
  EXPECT_EQ(s.blocks[0].nnz, 4u);
  EXPECT_DOUBLE_EQ(s.blocks[0].mean, 0.1);
  EXPECT_EQ(s.blocks[1].r, 2u);
  EXPECT_EQ(s.blocks[1].c, 2u);
  EXPECT_DOUBLE_EQ(s.blocks[1].mass, 0.6);
  EXPECT_EQ(s.blocks[1].nnz, 3u);
  EXPECT_DOUBLE_EQ(s.blocks[1].mean, 0.2);
  for (const auto& b : s.blocks) {
    ASSERT_EQ(b.hist.size(), kHistogramBins);
    for (double h : b.hist) EXPECT_DOUBLE_EQ(h, b.mean);
  }
  EXPECT_EQ(s.rows[0].instances, (std::vector<std::string>{"r1", "r2"}));
  EXPECT_EQ(s.cols[1].features, (std::vector<std::string>{"c3", "c4"}));
  EXPECT_EQ(s.meta["format"], kSummaryFormat);
}

TEST(Summary, BlockMassesMatchDenseSums) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = labelled(seed);
    std::mt19937_64 rng(seed);
    const auto rl = testing::random_labels(rng, 20, 4);
    const auto cl = testing::random_labels(rng, 10, 3);
    const auto c = Clustering::from_labels(rl, cl);
    const auto s = build_summary(m, c, total_cost(m, c, 0.05, 0.05));
    // Dense oracle keyed by canonical cluster (first-member order).
    const auto canon = c.canonical();
    const auto rpos = canon.labels(Side::rows, 20), cpos = canon.labels(Side::cols, 10);
    const auto d = oracle::to_dense(m);
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> want;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        if (d[i][j] > 0) {
          auto& w = want[{rpos[i] + 1, cpos[j] + 1}];
          w.first += d[i][j];
          ++w.second;
        }
    ASSERT_EQ(s.blocks.size(), want.size());
    double sum = 0;
    for (const auto& b : s.blocks) {
      const auto& w = want.at({b.r, b.c});
      EXPECT_NEAR(b.mass, w.first, 1e-8);
      EXPECT_EQ(b.nnz, w.second);
      sum += b.mass;
    }
    EXPECT_NEAR(sum, 1.0, 1e-8);
    // Grouped by row cluster, mass descending within a group.
    for (std::size_t k = 1; k < s.blocks.size(); ++k) {
      const auto& a = s.blocks[k - 1];
      const auto& b = s.blocks[k];
      EXPECT_TRUE(a.r < b.r || (a.r == b.r && a.mass >= b.mass));
    }
  }
}

TEST(Summary, HistogramsAreOrderedAndComplete) {
  const auto s = labelled_summary(3);
  for (const auto& b : s.blocks) {
    for (std::size_t k = 1; k < b.hist.size(); ++k) EXPECT_LE(b.hist[k], b.hist[k - 1] + 1e-12);
    EXPECT_LE(b.hist.back(), b.mean + 1e-12);
    EXPECT_GE(b.hist.front(), b.mean - 1e-12);
  }
  const auto m = labelled(3);
  std::map<std::string, std::size_t> nnz;
  for (const auto& e : m.entries()) ++nnz[m.col_meta()[e.col].id];
  for (const auto& l : s.legends) {
    for (std::size_t k = 1; k < l.features.size(); ++k) {
      EXPECT_GE(l.features[k - 1].importance, l.features[k].importance);
    }
    for (const auto& f : l.features) {
      std::size_t total = 0;
      for (auto h : f.hist) total += h;
      EXPECT_EQ(total, nnz[f.id]);
    }
  }
}

TEST(Summary, FlowsConserveInstances) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = labelled_summary(seed);
    std::map<ClusterId, std::size_t> per_cluster;
    std::map<std::string, std::size_t> per_class;
    for (const auto& f : s.flows) {
      EXPECT_GT(f.correct + f.incorrect, 0u);
      per_cluster[f.cluster] += f.correct + f.incorrect;
      per_class[f.cls] += f.correct + f.incorrect;
    }
    for (const auto& r : s.rows) EXPECT_EQ(per_cluster[r.cluster], r.instances.size());
    std::size_t total = 0;
    for (const auto& c : s.classes) {
      EXPECT_EQ(per_class[c.cls], c.total);
      EXPECT_EQ(c.retained, c.total);
      total += c.total;
    }
    EXPECT_EQ(total, 20u);
  }
}

TEST(Summary, WorkedExampleFlows) {
  const auto s = worked_summary();
  const std::vector<Flow> want{{"A", 1, 1, 1}, {"B", 2, 2, 0}};
  EXPECT_EQ(s.flows, want);
}

TEST(Summary, RoundTripIsByteIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = labelled_summary(seed);
    const auto text = serialize(s);
    const auto back = summary_from_json(parse_json(text, "summary"));
    EXPECT_EQ(serialize(back), text);
    EXPECT_EQ(back, s);
  }
}

TEST(Summary, RejectsForeignDocuments) {
  EXPECT_THROW(summary_from_json(Json::parse(R"({"meta": {"format": "other"}})")), InputError);
  EXPECT_THROW(summary_from_json(Json::parse(R"({"rows": []})")), InputError);
  auto doc = to_json(worked_summary());
  doc["blocks"][0]["nnz"] = "four";
  EXPECT_THROW(summary_from_json(doc), InputError);
}

TEST(Filter, EmptySpecIsIdentity) {
  const auto s = labelled_summary(1);
  EXPECT_EQ(apply_filter(s, {}), s);
  EXPECT_EQ(apply_filter(s, filter_spec_from_json(Json::object())), s);
}

TEST(Filter, SingleClass) {
  const auto s = worked_summary();
  FilterSpec spec;
  spec.classes = std::vector<std::string>{"A"};
  const auto f = apply_filter(s, spec);
  ASSERT_EQ(f.rows.size(), 1u);
  EXPECT_EQ(f.rows[0].cluster, 1u);
  ASSERT_EQ(f.blocks.size(), 1u);
  EXPECT_EQ(f.blocks[0], s.blocks[0]);
  const std::vector<ClassCount> classes{{"A", 2, 2}, {"B", 2, 0}};
  EXPECT_EQ(f.classes, classes);
  EXPECT_EQ(f.cols, s.cols);
  EXPECT_EQ(f.legends, s.legends);
}

TEST(Filter, OutcomeAndThresholds) {
  const auto s = worked_summary();
  FilterSpec spec;
  spec.outcome = Outcome::incorrect;
  auto f = apply_filter(s, spec);
  ASSERT_EQ(f.instances.size(), 1u);
  EXPECT_EQ(f.instances[0].id, "r2");
  EXPECT_EQ(f.flows, (std::vector<Flow>{{"A", 1, 0, 1}}));

  spec = {};
  spec.min_mean_value = 0.15;
  f = apply_filter(s, spec);
  ASSERT_EQ(f.rows.size(), 1u);
  EXPECT_EQ(f.rows[0].cluster, 2u);
  ASSERT_EQ(f.blocks.size(), 1u);
  EXPECT_EQ(f.blocks[0].c, 2u);

  spec = {};
  spec.min_cluster_size = 3;
  f = apply_filter(s, spec);
  EXPECT_TRUE(f.rows.empty());
  EXPECT_TRUE(f.blocks.empty());
  EXPECT_TRUE(f.flows.empty());
}

TEST(Filter, FeatureFilterMatchesScan) {
  const auto m = labelled(7);
  const auto s = labelled_summary(7);
  const auto d = oracle::to_dense(m);
  for (std::size_t j = 0; j < 10; ++j) {
    FilterSpec spec;
    spec.features = std::vector<std::string>{m.col_meta()[j].id};
    const auto f = apply_filter(s, spec);
    std::set<std::string> got, want;
    for (const auto& i : f.instances) got.insert(i.id);
    for (std::size_t i = 0; i < 20; ++i)
      if (d[i][j] > 0) want.insert(m.row_meta()[i].id);
    EXPECT_EQ(got, want) << "feature " << j;
  }
}

TEST(Filter, IdempotentAndCommutative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = labelled_summary(seed);
    FilterSpec by_class, by_feature, both;
    by_class.classes = std::vector<std::string>{"cat", "eel"};
    by_feature.features = std::vector<std::string>{"c2", "c5", "c9"};
    both.classes = by_class.classes;
    both.features = by_feature.features;
    const auto once = apply_filter(s, by_class);
    EXPECT_EQ(apply_filter(once, by_class), once);
    const auto cf = apply_filter(apply_filter(s, by_class), by_feature);
    const auto fc = apply_filter(apply_filter(s, by_feature), by_class);
    EXPECT_EQ(cf, fc);
    EXPECT_EQ(cf, apply_filter(s, both));
  }
}

TEST(Filter, UnknownNamesListOffenders) {
  const auto s = worked_summary();
  FilterSpec spec;
  spec.classes = std::vector<std::string>{"A", "Z", "Q"};
  try {
    apply_filter(s, spec);
    FAIL();
  } catch (const NotFound& e) {
    EXPECT_EQ(e.offenders(), (std::vector<std::string>{"Z", "Q"}));
  }
  spec = {};
  spec.features = std::vector<std::string>{"c1", "nope"};
  try {
    apply_filter(s, spec);
    FAIL();
  } catch (const NotFound& e) {
    EXPECT_EQ(e.offenders(), (std::vector<std::string>{"nope"}));
  }
}

TEST(Filter, SpecParsing) {
  const auto spec = filter_spec_from_json(Json::parse(
      R"({"classes": ["A"], "features": ["c1"], "outcome": "correct", "min_cluster_size": 2, "min_mean_value": 0.1})"));
  EXPECT_EQ(spec.classes->front(), "A");
  EXPECT_EQ(spec.outcome, Outcome::correct);
  EXPECT_EQ(spec.min_cluster_size, 2u);
  EXPECT_DOUBLE_EQ(spec.min_mean_value, 0.1);
  for (const char* bad : {R"({"colour": 1})", R"({"classes": "A"})", R"({"outcome": "maybe"})",
                          R"({"min_cluster_size": -1})", R"({"min_mean_value": -0.5})", R"([1])"}) {
    EXPECT_THROW(filter_spec_from_json(Json::parse(bad)), InputError) << bad;
  }
}

TEST(Summary, MassesMatchClusterMarginals) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = labelled(seed);
    std::mt19937_64 rng(seed + 100);
    const auto c = Clustering::from_labels(testing::random_labels(rng, 20, 4), testing::random_labels(rng, 10, 3))
                       .canonical();
    const auto mg = marginals(m, c);
    const auto s = build_summary(m, c, total_cost(m, c, 0.05, 0.05));
    for (const auto& b : s.blocks) EXPECT_NEAR(b.mass, mg.block(b.r - 1, b.c - 1), 1e-8);
  }
}

TEST(Summary, RoundingMatchesPrintf) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mant(1.0, 10.0);
  std::uniform_int_distribution<int> expo(-12, 12);
  for (int k = 0; k < 2000; ++k) {
    const double v = mant(rng) * std::pow(10.0, expo(rng));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    EXPECT_EQ(round_sig9(v), std::strtod(buf, nullptr)) << buf;
  }
}

TEST(Subset, WorkedExampleThreshold) {
  const auto m = testing::worked_example();
  const auto sub = extract_subset(worked_summary(), m, 2, 2, 0.15);
  const std::vector<SubsetEntry> want{{"r3", "c3", 0.2}, {"r3", "c4", 0.2}, {"r4", "c4", 0.2}};
  ASSERT_EQ(sub.entries.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_EQ(sub.entries[k].instance, want[k].instance);
    EXPECT_EQ(sub.entries[k].feature, want[k].feature);
    EXPECT_NEAR(sub.entries[k].value, want[k].value, 1e-12);
  }
  ASSERT_EQ(sub.instances.size(), 2u);
  EXPECT_EQ(sub.instances[0].cls, "B");
  EXPECT_EQ(sub.features, (std::vector<std::string>{"c3", "c4"}));
}

TEST(Subset, EdgeCases) {
  const auto m = testing::worked_example();
  const auto s = worked_summary();
  EXPECT_TRUE(extract_subset(s, m, 1, 1, 5.0).entries.empty());
  EXPECT_EQ(extract_subset(s, m, 1).entries.size(), 4u);
  EXPECT_THROW(extract_subset(s, m, 9), NotFound);
  EXPECT_THROW(extract_subset(s, m, 1, 9), NotFound);
  EXPECT_THROW(extract_subset(s, labelled(0), 1), ShapeError);
}

}  // namespace
}  // namespace melody
