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

// melody: summarize | bench | generate | serve | inspect | ingest
//
// Exit codes: 0 ok, 2 input error, 3 configuration error, 4 internal error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "melody/melody.hpp"
#include "melody/service.hpp"

namespace {

using namespace melody;

constexpr int kExitInput = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInternal = 4;

bool on_off(const std::string& v, const char* flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError(std::string(flag) + " expects on|off, got '" + v + "'");
}

// Flags shared by summarize and bench.
struct PipelineFlags {
  double beta_r = 0.05;
  double beta_c = 0.05;
  std::uint64_t seed = 0;
  std::string smooth = "on";
  std::string precluster = "on";
  std::optional<std::size_t> k_rows;
  std::optional<std::size_t> k_cols;
  std::string candidate_mode = "exhaustive";
  std::size_t k_neighbors = 200;
  std::size_t lsh_tables = 8;
  std::size_t lsh_hashes = 4;
  double lsh_width = 0.0;
  std::string loss = "marginal";
  std::string scale = "global";
  bool signed_values = false;
  std::optional<std::size_t> max_iterations;

  void attach(CLI::App* app) {
    app->add_option("--beta-r", beta_r, "Penalty per row cluster (bits)")->capture_default_str();
    app->add_option("--beta-c", beta_c, "Penalty per column cluster (bits)")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--smooth", smooth, "Cap values at the knee: on|off")->capture_default_str();
    app->add_option("--precluster", precluster, "Spectral warm start: on|off")->capture_default_str();
    app->add_option("--precluster-k-rows", k_rows, "Row groups for the warm start (default ceil(sqrt(m)))");
    app->add_option("--precluster-k-cols", k_cols, "Column groups for the warm start (default ceil(sqrt(n)))");
    app->add_option("--candidate-mode", candidate_mode, "exhaustive|lsh")->capture_default_str();
    app->add_option("--k-neighbors", k_neighbors, "LSH candidates per step")->capture_default_str();
    app->add_option("--lsh-tables", lsh_tables, "LSH tables (L)")->capture_default_str();
    app->add_option("--lsh-hashes", lsh_hashes, "Hashes per LSH table")->capture_default_str();
    app->add_option("--lsh-width", lsh_width, "LSH bucket width (0 = automatic)")->capture_default_str();
    app->add_option("--loss", loss, "marginal|raw|kl")->capture_default_str();
    app->add_option("--scale", scale, "Normalization: global|per-feature")->capture_default_str();
    app->add_flag("--signed", signed_values, "Take absolute values of signed attributions");
    app->add_option("--max-iterations", max_iterations, "Stop the engine after this many steps");
  }

  PipelineConfig config(bool trace) const {
    PipelineConfig c;
    c.engine.beta_rows = beta_r;
    c.engine.beta_cols = beta_c;
    c.engine.seed = seed;
    c.engine.candidate_mode = candidate_mode_from_string(candidate_mode);
    c.engine.k_neighbors = k_neighbors;
    c.engine.lsh.n_tables = lsh_tables;
    c.engine.lsh.hashes_per_table = lsh_hashes;
    c.engine.lsh.bucket_width = lsh_width;
    c.engine.loss = loss_kind_from_string(loss);
    c.engine.max_iterations = max_iterations;
    c.engine.trace = trace;
    c.smooth = on_off(smooth, "--smooth");
    c.precluster = on_off(precluster, "--precluster");
    c.k_rows = k_rows;
    c.k_cols = k_cols;
    if (scale == "global") c.normalize.scaling = Scaling::global;
    else if (scale == "per-feature") c.normalize.scaling = Scaling::per_feature;
    else throw ConfigError("--scale expects global|per-feature, got '" + scale + "'");
    c.normalize.signed_values = signed_values;
    c.validate();
    return c;
  }
};

int cmd_summarize(const std::string& input, const std::string& out, std::string manifest,
                  const PipelineFlags& flags, bool trace) {
  const auto config = flags.config(trace);
  const auto raw = load_explmat(input);
  const auto result = run_pipeline(raw, config);
  if (manifest.empty()) manifest = out + ".manifest.json";
  write_text_file(out, serialize(result.summary));
  write_text_file(manifest, manifest_json(result, config, input, out).dump(2) + "\n");
  spdlog::info("summary: {} row x {} column clusters, T = {:.6f} bits -> {}", result.summary.rows.size(),
               result.summary.cols.size(), result.engine.cost.total, out);
  return 0;
}

struct PlantedFlags {
  std::size_t rows = 500;
  std::size_t cols = 100;
  std::size_t blocks = 5;
  double noise = 0.05;
  double density = 1.0;

  void attach(CLI::App* app, bool prefixed) {
    const std::string p = prefixed ? "--planted-" : "--";
    app->add_option(p + "rows", rows, "Planted rows")->capture_default_str();
    app->add_option(p + "cols", cols, "Planted columns")->capture_default_str();
    app->add_option(p + "blocks", blocks, "Planted blocks")->capture_default_str();
    app->add_option(p + "noise", noise, "Fraction of entries moved off-block")->capture_default_str();
    app->add_option(p + "density", density, "In-block fill probability")->capture_default_str();
  }

  PlantedConfig config(std::uint64_t seed) const { return {rows, cols, blocks, noise, density, seed}; }
};

int cmd_bench(const std::string& input, bool planted, const PlantedFlags& pf, const std::string& out,
              const std::string& timing, const PipelineFlags& flags) {
  const auto config = flags.config(false);
  const bool with_timing = on_off(timing, "--timing");
  ExplanationMatrix m;
  if (!input.empty()) {
    m = normalize(load_explmat(input), config.normalize);
  } else if (planted) {
    m = make_planted(pf.config(flags.seed)).matrix;
  } else {
    throw ConfigError("bench needs --input or --planted");
  }
  const auto csv = ladder_csv(run_ladder(m, config), with_timing);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(out, csv);
  }
  return 0;
}

int cmd_generate(const PlantedFlags& pf, std::uint64_t seed, const std::string& out) {
  const auto p = make_planted(pf.config(seed));
  auto rows = p.matrix.row_meta();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].label = rows[i].predicted = "block" + std::to_string(p.row_labels[i] + 1);
  }
  const auto doc = explmat_to_json(p.matrix.rows(), p.matrix.cols(), p.matrix.entries(), rows,
                                   p.matrix.col_meta());
  write_text_file(out, doc.dump() + "\n");
  return 0;
}

int cmd_serve(const std::string& summary_path, const std::string& matrix_path, const std::string& host, int port) {
  auto summary = summary_from_json(parse_json(read_text_file(summary_path), summary_path));
  std::optional<ExplanationMatrix> matrix;
  if (!matrix_path.empty()) {
    NormalizeOptions opts;
    const auto& cfg = summary.meta.value("config", Json::object());
    if (cfg.value("scale", std::string("global")) == "per-feature") opts.scaling = Scaling::per_feature;
    matrix = normalize(load_explmat(matrix_path), opts);
    // Fails early when the matrix does not belong to the summary.
    if (!summary.rows.empty()) extract_subset(summary, *matrix, summary.rows.front().cluster, std::nullopt, 1e300);
  }
  const SummaryService service(std::move(summary), std::move(matrix));
  httplib::Server server;
  service.mount(server);
  spdlog::info("serving on http://{}:{}", host, port);
  if (!server.listen(host, port)) throw InputError("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

int cmd_inspect(const std::string& input) {
  const auto doc = parse_json(read_text_file(input), input);
  Json out;
  if (doc.contains("meta") && doc.contains("blocks")) {
    const auto s = summary_from_json(doc);
    out = {{"kind", "summary"},
           {"rows", s.rows.size()},
           {"cols", s.cols.size()},
           {"blocks", s.blocks.size()},
           {"instances", s.instances.size()},
           {"cost", s.meta.value("cost", Json::object())}};
  } else {
    const auto m = normalize(explmat_from_json(doc));
    auto dist = ValueDistribution::of(m);
    const auto knee = find_knee(dist);
    out = {{"kind", "explmat"},
           {"shape", {m.rows(), m.cols()}},
           {"nnz", m.nnz()},
           {"density", round_sig9(m.density())},
           {"max_value", dist.sorted_values.empty() ? 0.0 : round_sig9(dist.sorted_values.front())},
           {"knee", knee ? Json(round_sig9(*knee)) : Json(nullptr)}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_ingest_tabular(const std::string& csv, const std::string& schema, const std::string& out) {
  const auto table = read_tabular_csv(read_text_file(csv), parse_json(read_text_file(schema), schema));
  const auto raw = discretize_tabular(table).to_raw();
  write_text_file(out, explmat_to_json(raw.rows, raw.cols, raw.entries, raw.row_meta, raw.col_meta).dump() + "\n");
  return 0;
}

int cmd_ingest_topics(const std::string& input, const std::string& topics, const std::string& out) {
  const auto words = normalize(load_explmat(input));
  const auto doc = parse_json(read_text_file(topics), topics);
  std::map<std::string, std::string> mapping;
  try {
    mapping = doc.get<std::map<std::string, std::string>>();
  } catch (const Json::exception& e) {
    throw InputError(topics + ": expected an object of word -> topic (" + e.what() + ")");
  }
  const auto m = aggregate_topics(words, mapping);
  write_text_file(out, explmat_to_json(m.rows(), m.cols(), m.entries(), m.row_meta(), m.col_meta()).dump() + "\n");
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("melody");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MELODY_LOG")) {
    const std::string name = env;
    const auto level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off") {
      spdlog::warn("MELODY_LOG='{}' is not a log level; keeping 'warn'", name);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"melody: co-clustering summaries of local model explanations"};
  app.require_subcommand(1);

  PipelineFlags pipeline;
  std::string input, out, manifest;
  bool trace = false;
  auto* summarize = app.add_subcommand("summarize", "Run the pipeline and write summary-json plus a manifest");
  summarize->add_option("--input", input, "explmat-json v1 file")->required();
  summarize->add_option("--out", out, "summary-json output path")->required();
  summarize->add_option("--manifest", manifest, "manifest output path (default <out>.manifest.json)");
  summarize->add_flag("--trace", trace, "Record the merge trace in the manifest");
  pipeline.attach(summarize);

  PipelineFlags bench_flags;
  PlantedFlags bench_planted;
  std::string bench_input, bench_out, timing = "on";
  bool planted = false;
  auto* bench = app.add_subcommand("bench", "Run the heuristic ladder and print CSV");
  bench->add_option("--input", bench_input, "explmat-json v1 file");
  bench->add_flag("--planted", planted, "Use a planted-block matrix instead of --input");
  bench_planted.attach(bench, true);
  bench->add_option("--out", bench_out, "CSV output path (default stdout)");
  bench->add_option("--timing", timing, "Report wall-clock: on|off")->capture_default_str();
  bench_flags.attach(bench);

  PlantedFlags gen_flags;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a planted-block explmat-json fixture");
  gen_flags.attach(generate, false);
  generate->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  generate->add_option("--out", gen_out, "Output path")->required();

  std::string serve_summary, serve_matrix, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve a summary over HTTP");
  serve->add_option("--summary", serve_summary, "summary-json file")->required();
  serve->add_option("--matrix", serve_matrix, "explmat-json source matrix (enables /subset)");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port")->capture_default_str();

  std::string inspect_input;
  auto* inspect = app.add_subcommand("inspect", "Describe an explmat-json or summary-json file");
  inspect->add_option("--input", inspect_input, "File to describe")->required();

  std::string ingest_csv, ingest_schema, ingest_input, ingest_topics, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Convert exports into explmat-json");
  ingest->require_subcommand(1);
  auto* tabular = ingest->add_subcommand("tabular", "Quantile-discretize a CSV table into logic columns");
  tabular->add_option("--csv", ingest_csv, "CSV with a header row")->required();
  tabular->add_option("--schema", ingest_schema, "JSON schema {id?, attributes:[{name,type}]}")->required();
  tabular->add_option("--out", ingest_out, "Output path")->required();
  auto* topics = ingest->add_subcommand("topics", "Max-pool word columns into topic columns");
  topics->add_option("--input", ingest_input, "Word-level explmat-json")->required();
  topics->add_option("--topics", ingest_topics, "JSON object word -> topic")->required();
  topics->add_option("--out", ingest_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*summarize) return cmd_summarize(input, out, manifest, pipeline, trace);
    if (*bench) return cmd_bench(bench_input, planted, bench_planted, bench_out, timing, bench_flags);
    if (*generate) return cmd_generate(gen_flags, gen_seed, gen_out);
    if (*serve) return cmd_serve(serve_summary, serve_matrix, host, port);
    if (*inspect) return cmd_inspect(inspect_input);
    if (*tabular) return cmd_ingest_tabular(ingest_csv, ingest_schema, ingest_out);
    if (*topics) return cmd_ingest_topics(ingest_input, ingest_topics, ingest_out);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const NotFound& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const ShapeError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
