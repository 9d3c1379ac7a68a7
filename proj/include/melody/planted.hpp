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

// Synthetic block-diagonal explanation matrices with known row and column
// groups, used by the benchmark ladder and the test suites.

#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "melody/error.hpp"
#include "melody/matrix.hpp"

namespace melody {

struct PlantedConfig {
  std::size_t rows = 500;
  std::size_t cols = 100;
  std::size_t blocks = 5;
  double noise = 0.05;    // fraction of in-block entries moved off-block
  double density = 1.0;   // chance that an in-block cell is nonzero
  std::uint64_t seed = 0;
};

struct Planted {
  ExplanationMatrix matrix;
  std::vector<std::size_t> row_labels;
  std::vector<std::size_t> col_labels;
};

/// Row i belongs to block i * blocks / rows (likewise columns). Block b has
/// level 1 + b/2 and in-block values level * U(0.5, 1.5). Noise relocates a
/// `noise` fraction of the in-block entries to random off-block cells of the
/// same row, so row masses are unchanged.
inline Planted make_planted(const PlantedConfig& c) {
  if (c.blocks < 1 || c.blocks > c.rows || c.blocks > c.cols) {
    throw ConfigError("planted: block count must be between 1 and the matrix sides");
  }
  if (!(c.noise >= 0.0 && c.noise < 1.0) || !(c.density > 0.0 && c.density <= 1.0)) {
    throw ConfigError("planted: noise must lie in [0, 1) and density in (0, 1]");
  }
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::bernoulli_distribution keep(c.density);
  Planted out{ExplanationMatrix(), {}, {}};
  out.row_labels.resize(c.rows);
  out.col_labels.resize(c.cols);
  for (std::size_t i = 0; i < c.rows; ++i) out.row_labels[i] = i * c.blocks / c.rows;
  for (std::size_t j = 0; j < c.cols; ++j) out.col_labels[j] = j * c.blocks / c.cols;
  std::vector<std::vector<Index>> block_cols(c.blocks);
  for (std::size_t j = 0; j < c.cols; ++j) block_cols[out.col_labels[j]].push_back(Index(j));

  std::vector<Entry> entries;
  for (std::size_t i = 0; i < c.rows; ++i) {
    const auto b = out.row_labels[i];
    const double level = 1.0 + 0.5 * double(b);
    for (auto j : block_cols[b]) {
      if (keep(rng)) entries.push_back({Index(i), j, level * jitter(rng)});
    }
  }
  if (c.noise > 0.0 && c.blocks > 1) {
    std::set<std::pair<Index, Index>> taken;
    for (const auto& e : entries) taken.insert({e.row, e.col});
    std::bernoulli_distribution move(c.noise);
    std::uniform_int_distribution<std::size_t> any_col(0, c.cols - 1);
    for (auto& e : entries) {
      if (!move(rng)) continue;
      for (int attempt = 0; attempt < 32; ++attempt) {
        const auto j = Index(any_col(rng));
        if (out.col_labels[j] == out.row_labels[e.row] || taken.count({e.row, j})) continue;
        taken.erase({e.row, e.col});
        taken.insert({e.row, j});
        e.col = j;
        break;
      }
    }
  }
  if (entries.empty()) entries.push_back({0, 0, 1.0});
  out.matrix = normalize(RawMatrix{c.rows, c.cols, std::move(entries), {}, {}});
  return out;
}

}  // namespace melody
