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

// End-to-end runs: normalize -> [smooth] -> [precluster] -> engine -> summary,
// plus the heuristic ladder used by `melody bench`.

#pragma once

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "melody/cost.hpp"
#include "melody/engine.hpp"
#include "melody/io.hpp"
#include "melody/knee.hpp"
#include "melody/matrix.hpp"
#include "melody/spectral.hpp"
#include "melody/summary.hpp"

namespace melody {

struct PipelineConfig {
  EngineConfig engine;
  NormalizeOptions normalize;
  bool smooth = true;
  double knee_sensitivity = 1.0;
  bool precluster = true;
  std::optional<std::size_t> k_rows;
  std::optional<std::size_t> k_cols;

  void validate() const {
    engine.validate();
    if (!(knee_sensitivity > 0.0)) throw ConfigError("knee sensitivity must be positive");
    if ((k_rows && *k_rows == 0) || (k_cols && *k_cols == 0)) {
      throw ConfigError("precluster k must be at least 1");
    }
  }

  // Echoed into the summary and manifest; no paths, so reruns compare equal.
  Json to_json() const {
    Json j;
    j["beta_r"] = engine.beta_rows;
    j["beta_c"] = engine.beta_cols;
    j["loss"] = to_string(engine.loss);
    j["scale"] = normalize.scaling == Scaling::global ? "global" : "per-feature";
    j["smooth"] = smooth;
    j["precluster"] = precluster;
    j["precluster_k_rows"] = k_rows ? Json(*k_rows) : Json("auto");
    j["precluster_k_cols"] = k_cols ? Json(*k_cols) : Json("auto");
    j["candidate_mode"] = to_string(engine.candidate_mode);
    j["k_neighbors"] = engine.k_neighbors;
    j["lsh_tables"] = engine.lsh.n_tables;
    j["lsh_hashes"] = engine.lsh.hashes_per_table;
    j["lsh_width"] = engine.lsh.bucket_width > 0.0 ? Json(engine.lsh.bucket_width) : Json("auto");
    return j;
  }
};

struct StageTimes {
  double normalize_ms = 0.0;
  double smooth_ms = 0.0;
  double precluster_ms = 0.0;
  double engine_ms = 0.0;
  double summary_ms = 0.0;

  double total_ms() const { return normalize_ms + smooth_ms + precluster_ms + engine_ms + summary_ms; }
};

struct PipelineResult {
  ExplanationMatrix normalized;
  ExplanationMatrix working;  // after smoothing
  std::optional<Clustering> start;
  EngineResult engine;
  Summary summary;
  StageTimes times;
  // Marginal loss of the final clustering on the unsmoothed matrix; the
  // common yardstick for comparing pipeline variants.
  double reference_loss = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Runs the pipeline on an already normalized matrix.
inline PipelineResult run_pipeline_normalized(ExplanationMatrix normalized, const PipelineConfig& config,
                                              double normalize_ms = 0.0) {
  config.validate();
  PipelineResult r;
  r.times.normalize_ms = normalize_ms;
  detail::Stopwatch clock;
  r.normalized = std::move(normalized);
  r.working = config.smooth ? smooth(r.normalized, config.knee_sensitivity) : r.normalized;
  r.times.smooth_ms = clock.lap_ms();
  if (config.precluster) {
    SpectralConfig sc;
    sc.k_rows = config.k_rows;
    sc.k_cols = config.k_cols;
    sc.seed = config.engine.seed;
    r.start = precluster(r.working, sc);
  }
  r.times.precluster_ms = clock.lap_ms();
  r.engine = summarize(r.working, config.engine, r.start);
  r.times.engine_ms = clock.lap_ms();
  r.summary = build_summary(r.working, r.engine.clustering, r.engine.cost, config.to_json(), config.engine.seed);
  r.times.summary_ms = clock.lap_ms();
  r.reference_loss = marginal_loss(r.normalized, r.engine.clustering, LossKind::marginal).loss;
  return r;
}

inline PipelineResult run_pipeline(const RawMatrix& raw, const PipelineConfig& config) {
  config.validate();
  detail::Stopwatch clock;
  auto m = normalize(raw, config.normalize);
  return run_pipeline_normalized(std::move(m), config, clock.lap_ms());
}

inline Json manifest_json(const PipelineResult& r, const PipelineConfig& config, const std::string& input,
                          const std::string& output) {
  Json j;
  j["format"] = "manifest-json v1";
  j["input"] = input;
  j["output"] = output;
  j["config"] = config.to_json();
  j["seed"] = config.engine.seed;
  j["shape"] = {r.normalized.rows(), r.normalized.cols()};
  j["nnz"] = r.normalized.nnz();
  j["stages_ms"] = {{"normalize", r.times.normalize_ms},
                    {"smooth", r.times.smooth_ms},
                    {"precluster", r.times.precluster_ms},
                    {"engine", r.times.engine_ms},
                    {"summary", r.times.summary_ms}};
  j["wall_ms"] = r.times.total_ms();
  j["iterations"] = r.engine.iterations;
  j["evaluations"] = r.engine.evaluations;
  j["accepted_merges"] = r.engine.accepted_merges;
  j["clusters"] = {{"rows", r.engine.clustering.row_clusters.size()},
                   {"cols", r.engine.clustering.col_clusters.size()}};
  j["cost"] = {{"model", round_sig9(r.engine.cost.model_cost)},
               {"loss", round_sig9(r.engine.cost.loss)},
               {"total", round_sig9(r.engine.cost.total)}};
  if (config.engine.trace) {
    Json trace = Json::array();
    for (const auto& e : r.engine.trace) {
      trace.push_back({{"side", to_string(e.side)},
                       {"popped", e.popped},
                       {"candidate", e.candidate ? Json(*e.candidate) : Json(nullptr)},
                       {"delta", round_sig9(e.delta)},
                       {"accepted", e.accepted},
                       {"total", round_sig9(e.total)}});
    }
    j["trace"] = std::move(trace);
    j["trace_truncated"] = r.engine.trace_truncated;
  }
  return j;
}

// ---- heuristic ladder -------------------------------------------------------

struct LadderRow {
  std::string variant;
  CandidateMode mode = CandidateMode::exhaustive;
  LossKind loss = LossKind::marginal;
  double reference_loss = 0.0;
  double total_cost = 0.0;
  double wall_ms = 0.0;
  std::size_t evaluations = 0;
  Clustering clustering;
};

/// The four cumulative variants, each run in both candidate modes. `base`
/// supplies beta, seed and LSH parameters.
inline std::vector<PipelineConfig> ladder_configs(const PipelineConfig& base) {
  std::vector<PipelineConfig> out;
  for (auto mode : {CandidateMode::exhaustive, CandidateMode::lsh}) {
    for (int v = 0; v < 4; ++v) {
      PipelineConfig c = base;
      c.engine.candidate_mode = mode;
      c.engine.loss = v == 0 ? LossKind::whole_kl : LossKind::marginal;
      c.smooth = v >= 2;
      c.precluster = v >= 3;
      out.push_back(c);
    }
  }
  return out;
}

inline const char* ladder_variant_name(const PipelineConfig& c) {
  if (c.engine.loss == LossKind::whole_kl) return "baseline-kl";
  if (c.precluster) return "+precluster";
  if (c.smooth) return "+smooth";
  return "marginal";
}

inline std::vector<LadderRow> run_ladder(const ExplanationMatrix& normalized, const PipelineConfig& base) {
  std::vector<LadderRow> rows;
  for (const auto& c : ladder_configs(base)) {
    detail::Stopwatch clock;
    const auto r = run_pipeline_normalized(normalized, c);
    const double ms = clock.lap_ms();
    rows.push_back({ladder_variant_name(c), c.engine.candidate_mode, c.engine.loss, r.reference_loss,
                    r.engine.cost.total, ms, r.engine.evaluations, r.engine.clustering});
    spdlog::info("bench: {} / {}: loss {:.6f}, T {:.6f}, {:.1f} ms", rows.back().variant,
                 to_string(c.engine.candidate_mode), r.reference_loss, r.engine.cost.total, ms);
  }
  return rows;
}

/// CSV with header variant,mode,loss,total_cost,wall_ms,evaluations. With
/// `timing` off the wall-clock column is written as 0 so the output is
/// reproducible.
inline std::string ladder_csv(const std::vector<LadderRow>& rows, bool timing = true) {
  std::ostringstream out;
  out << "variant,mode,loss,total_cost,wall_ms,evaluations\n";
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.variant << ',' << to_string(r.mode) << ',' << num(r.reference_loss) << ',' << num(r.total_cost)
        << ',' << (timing ? num(r.wall_ms) : std::string("0")) << ',' << r.evaluations << '\n';
  }
  return out.str();
}

}  // namespace melody
