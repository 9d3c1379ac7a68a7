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

#include <random>
#include <vector>

#include "melody/clustering.hpp"
#include "melody/matrix.hpp"

namespace melody::testing {

// The 4x4 worked example: two row/column groups, the second one not rank-1.
inline ExplanationMatrix worked_example() {
  auto m = ExplanationMatrix::from_dense({{.1, .1, 0, 0},
                                          {.1, .1, 0, 0},
                                          {0, 0, .2, .2},
                                          {0, 0, 0, .2}});
  std::vector<RowMeta> rows = default_row_meta(4);
  rows[0].label = rows[0].predicted = "A";
  rows[1].label = "A";
  rows[1].predicted = "B";
  rows[1].correct = false;
  rows[2].label = rows[2].predicted = "B";
  rows[3].label = rows[3].predicted = "B";
  return ExplanationMatrix(4, 4, {m.entries().begin(), m.entries().end()}, rows);
}

inline Clustering worked_example_clustering() {
  return Clustering::from_labels({0, 0, 1, 1}, {0, 0, 1, 1});
}

// Random sparse normalized matrix; rows/columns may be empty.
inline ExplanationMatrix random_sparse(std::mt19937_64& rng, std::size_t m, std::size_t n,
                                       double density) {
  std::bernoulli_distribution keep(density);
  std::uniform_real_distribution<double> val(0.05, 1.0);
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (keep(rng)) entries.push_back({Index(i), Index(j), val(rng)});
    }
  }
  if (entries.empty()) entries.push_back({0, 0, 1.0});
  return normalize(RawMatrix{m, n, std::move(entries), {}, {}});
}

// Random partition of n items into at most k labelled groups.
inline std::vector<std::size_t> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = pick(rng);
  return labels;
}

}  // namespace melody::testing
