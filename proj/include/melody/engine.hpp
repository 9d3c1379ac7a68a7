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

// Randomized bottom-up co-clustering.
//
// Each side keeps an active list and a finalized list. A step pops a random
// active cluster and looks for the merge partner (active or finalized) with
// the largest cost reduction beta - (D_after - D_before). A positive best
// reduction folds the popped cluster into the partner, which stays where it
// is; otherwise the popped cluster is finalized. Row and column steps
// alternate until both active lists are empty.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "melody/clustering.hpp"
#include "melody/cost.hpp"
#include "melody/error.hpp"
#include "melody/lsh.hpp"
#include "melody/matrix.hpp"

namespace melody {

enum class CandidateMode { exhaustive, lsh };

inline const char* to_string(CandidateMode m) { return m == CandidateMode::lsh ? "lsh" : "exhaustive"; }

inline CandidateMode candidate_mode_from_string(const std::string& s) {
  if (s == "exhaustive") return CandidateMode::exhaustive;
  if (s == "lsh") return CandidateMode::lsh;
  throw ConfigError("unknown candidate mode '" + s + "' (expected exhaustive|lsh)");
}

struct EngineConfig {
  double beta_rows = 0.05;
  double beta_cols = 0.05;
  std::uint64_t seed = 0;
  CandidateMode candidate_mode = CandidateMode::exhaustive;
  std::size_t k_neighbors = 200;
  std::optional<std::size_t> max_iterations;
  LossKind loss = LossKind::marginal;
  LshConfig lsh;
  bool trace = false;

  double beta(Side s) const { return s == Side::rows ? beta_rows : beta_cols; }

  void validate() const {
    if (!(beta_rows >= 0.0) || !(beta_cols >= 0.0) || !std::isfinite(beta_rows) ||
        !std::isfinite(beta_cols)) {
      throw ConfigError("cluster penalties must be finite and nonnegative");
    }
    if (k_neighbors < 1) throw ConfigError("k_neighbors must be at least 1");
    if (candidate_mode == CandidateMode::lsh) lsh.validate();
  }
};

// Merges must gain more than this (bits) to be accepted, so that rounding
// noise on a zero-gain merge never counts as an improvement.
inline constexpr double kAcceptEpsilon = 1e-12;
inline constexpr std::size_t kTraceLimit = 100000;

struct TraceEvent {
  Side side = Side::rows;
  ClusterId popped = 0;
  std::optional<ClusterId> candidate;  // best partner, if any was evaluated
  double delta = 0.0;                  // best cost reduction
  bool accepted = false;
  double total = 0.0;  // T after the step

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct EngineResult {
  Clustering clustering;
  CostBreakdown cost;
  std::vector<TraceEvent> trace;
  bool trace_truncated = false;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t accepted_merges = 0;
};

class IterationCap : public Error {
 public:
  explicit IterationCap(EngineResult partial)
      : Error("iteration cap reached after " + std::to_string(partial.iterations) + " steps"),
        partial_(std::move(partial)) {}
  const EngineResult& partial() const { return partial_; }

 private:
  EngineResult partial_;
};

struct EngineState {
  CoClusterTable table;
  std::vector<ClusterId> active[2];
  std::vector<ClusterId> finalized[2];
  std::mt19937_64 rng;
  std::optional<LshTable> lsh[2];
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t accepted_merges = 0;
  std::vector<TraceEvent> trace;
  bool trace_truncated = false;

  EngineState(const ExplanationMatrix& m, const Clustering& start, const EngineConfig& config)
      : table(m, start, config.loss), rng(config.seed) {
    config.validate();
    for (int s = 0; s < 2; ++s) {
      const auto side = static_cast<Side>(s);
      for (const auto& c : start.side(side)) active[s].push_back(c.id);
      if (config.candidate_mode == CandidateMode::lsh) {
        auto lc = config.lsh;
        lc.seed = config.lsh.seed ^ (config.seed * 0x9e3779b97f4a7c15ULL) ^ std::uint64_t(s);
        lsh[s] = build_lsh_table(m, side, lc);
        lsh[s]->assign(start.side(side));
      }
    }
  }

  std::vector<ClusterId>& active_list(Side s) { return active[s == Side::rows ? 0 : 1]; }
  std::vector<ClusterId>& final_list(Side s) { return finalized[s == Side::rows ? 0 : 1]; }
  const std::vector<ClusterId>& active_list(Side s) const { return active[s == Side::rows ? 0 : 1]; }
  const std::vector<ClusterId>& final_list(Side s) const { return finalized[s == Side::rows ? 0 : 1]; }

  double total(const EngineConfig& config) const {
    return config.beta_rows * double(table.count(Side::rows)) +
           config.beta_cols * double(table.count(Side::cols)) + table.loss();
  }

  void record(const TraceEvent& e) {
    if (trace.size() < kTraceLimit) {
      trace.push_back(e);
    } else {
      trace_truncated = true;
    }
  }
};

/// Removes a uniformly chosen cluster from the side's active list.
inline ClusterId random_pop(EngineState& state, Side side) {
  auto& list = state.active_list(side);
  if (list.empty()) throw EmptyPool();
  std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
  const auto i = pick(state.rng);
  const auto id = list[i];
  list[i] = list.back();
  list.pop_back();
  return id;
}

/// One pop-evaluate-merge-or-finalize step on `side`.
inline void step(EngineState& state, Side side, const EngineConfig& config) {
  const auto popped = random_pop(state, side);
  const double beta = config.beta(side);

  std::optional<ClusterId> best;
  double best_delta = -std::numeric_limits<double>::infinity();
  auto consider = [&](ClusterId c) {
    const double d = state.table.merge_delta(side, popped, c, beta);
    ++state.evaluations;
    if (!best || d > best_delta + kAcceptEpsilon ||
        (d >= best_delta - kAcceptEpsilon && c < *best)) {
      best = c;
      best_delta = d;
    }
  };
  if (config.candidate_mode == CandidateMode::exhaustive) {
    for (auto c : state.active_list(side)) consider(c);
    for (auto c : state.final_list(side)) consider(c);
  } else {
    auto& index = *state.lsh[side == Side::rows ? 0 : 1];
    for (const auto& [c, score] : index.topk(popped, config.k_neighbors)) consider(c);
  }

  TraceEvent ev{side, popped, best, best ? best_delta : 0.0, false, 0.0};
  if (best && best_delta > kAcceptEpsilon) {
    state.table.merge(side, popped, *best);
    if (auto& index = state.lsh[side == Side::rows ? 0 : 1]) index->on_merge(popped, *best);
    ++state.accepted_merges;
    ev.accepted = true;
  } else {
    state.final_list(side).push_back(popped);
  }
  ++state.iterations;
  if (config.trace) {
    ev.total = state.total(config);
    state.record(ev);
  }
}

inline EngineResult finish(const EngineState& state, const ExplanationMatrix& m, const EngineConfig& config) {
  EngineResult r;
  r.clustering = state.table.clustering();
  r.cost = total_cost(m, r.clustering, config.beta_rows, config.beta_cols, config.loss);
  r.trace = state.trace;
  r.trace_truncated = state.trace_truncated;
  r.iterations = state.iterations;
  r.evaluations = state.evaluations;
  r.accepted_merges = state.accepted_merges;
  return r;
}

/// Runs the merge loop from `start` (singletons when absent) until both
/// active lists drain.
inline EngineResult summarize(const ExplanationMatrix& m, const EngineConfig& config,
                              const std::optional<Clustering>& start = std::nullopt) {
  config.validate();
  EngineState state(m, start ? *start : Clustering::singletons(m.rows(), m.cols()), config);
  spdlog::debug("engine: {} row / {} column clusters, mode {}", state.active[0].size(),
                state.active[1].size(), to_string(config.candidate_mode));
  while (!state.active[0].empty() || !state.active[1].empty()) {
    for (auto side : {Side::rows, Side::cols}) {
      if (state.active_list(side).empty()) continue;
      if (config.max_iterations && state.iterations >= *config.max_iterations) {
        throw IterationCap(finish(state, m, config));
      }
      step(state, side, config);
    }
  }
  auto result = finish(state, m, config);
  spdlog::debug("engine: {} steps, {} evaluations, {} merges, T = {:.6f}", result.iterations,
                result.evaluations, result.accepted_merges, result.cost.total);
  return result;
}

}  // namespace melody
