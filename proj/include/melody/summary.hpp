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

// The serialized summary ("summary-json v1") and the views derived from it.
//
//   {"meta":   {"format", "config", "seed", "cost": {"model", "loss", "total"}},
//    "rows":   [{"cluster", "instances": [id...]}],
//    "cols":   [{"cluster", "features": [id...]}],
//    "blocks": [{"r", "c", "mass", "nnz", "mean", "hist": [20]}],
//    "flows":  [{"class", "cluster", "correct", "incorrect"}],
//    "legends":[{"cluster", "features": [{"id", "name", "importance", "hist": [20]}]}],
//    "classes":[{"class", "total", "retained"}],
//    "instances": [{"id", "class", "pred", "correct", "cluster", "features": [id...]}]}
//
// Cluster ids are 1-based and ordered by each cluster's smallest member.
// Blocks are grouped by row cluster and sorted by descending mass within a
// row. Block histograms hold the means of 20 equal-count bins of the
// block's values sorted high to low; legend histograms count a feature's
// nonzero values in 20 equal-width bins over [0, largest matrix value].

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "melody/clustering.hpp"
#include "melody/cost.hpp"
#include "melody/error.hpp"
#include "melody/io.hpp"
#include "melody/matrix.hpp"

namespace melody {

inline constexpr std::size_t kHistogramBins = 20;
inline constexpr const char* kSummaryFormat = "summary-json v1";

struct RowGroup {
  ClusterId cluster = 0;
  std::vector<std::string> instances;
  friend bool operator==(const RowGroup&, const RowGroup&) = default;
};

struct ColGroup {
  ClusterId cluster = 0;
  std::vector<std::string> features;
  friend bool operator==(const ColGroup&, const ColGroup&) = default;
};

struct Block {
  ClusterId r = 0;
  ClusterId c = 0;
  double mass = 0.0;
  std::size_t nnz = 0;
  double mean = 0.0;
  std::vector<double> hist;
  friend bool operator==(const Block&, const Block&) = default;
};

struct Flow {
  std::string cls;
  ClusterId cluster = 0;
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  friend bool operator==(const Flow&, const Flow&) = default;
};

struct LegendFeature {
  std::string id;
  std::string name;
  double importance = 0.0;  // total mass of the feature
  std::vector<std::size_t> hist;
  friend bool operator==(const LegendFeature&, const LegendFeature&) = default;
};

struct Legend {
  ClusterId cluster = 0;
  std::vector<LegendFeature> features;
  friend bool operator==(const Legend&, const Legend&) = default;
};

struct ClassCount {
  std::string cls;
  std::size_t total = 0;
  std::size_t retained = 0;
  friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

struct Instance {
  std::string id;
  std::string cls;
  std::string pred;
  bool correct = true;
  ClusterId cluster = 0;
  std::vector<std::string> features;  // features with a nonzero value
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Summary {
  Json meta = Json::object();
  std::vector<RowGroup> rows;
  std::vector<ColGroup> cols;
  std::vector<Block> blocks;
  std::vector<Flow> flows;
  std::vector<Legend> legends;
  std::vector<ClassCount> classes;
  std::vector<Instance> instances;

  friend bool operator==(const Summary&, const Summary&) = default;
};

namespace detail {

// Means of `bins` equal-count slices of `desc`; an empty slice repeats the
// value at its start so the sequence stays non-increasing.
inline std::vector<double> equal_count_bins(const std::vector<double>& desc, std::size_t bins) {
  std::vector<double> out(bins, 0.0);
  const std::size_t n = desc.size();
  if (n == 0) return out;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
    if (lo == hi) {
      out[b] = desc[std::min(lo, n - 1)];
      continue;
    }
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k) s += desc[k];
    out[b] = s / double(hi - lo);
  }
  return out;
}

inline std::vector<std::size_t> equal_width_counts(const std::vector<double>& values, double top,
                                                   std::size_t bins) {
  std::vector<std::size_t> out(bins, 0);
  for (double v : values) {
    auto b = top > 0.0 ? static_cast<std::size_t>(v / top * double(bins)) : 0;
    ++out[std::min(b, bins - 1)];
  }
  return out;
}

inline void flows_and_classes(Summary& s, const std::vector<ClassCount>& totals) {
  std::map<std::pair<std::string, ClusterId>, Flow> flows;
  std::map<std::string, std::size_t> retained;
  for (const auto& inst : s.instances) {
    auto& f = flows[{inst.cls, inst.cluster}];
    f.cls = inst.cls;
    f.cluster = inst.cluster;
    (inst.correct ? f.correct : f.incorrect) += 1;
    ++retained[inst.cls];
  }
  s.flows.clear();
  for (auto& [key, f] : flows) s.flows.push_back(std::move(f));
  s.classes = totals;
  for (auto& c : s.classes) c.retained = retained.count(c.cls) ? retained[c.cls] : 0;
}

}  // namespace detail

/// Materializes the summary of `m` under `clustering`.
inline Summary build_summary(const ExplanationMatrix& m, const Clustering& clustering,
                             const CostBreakdown& cost, const Json& config = Json::object(),
                             std::uint64_t seed = 0) {
  clustering.validate(m.rows(), m.cols());
  const auto canon = clustering.canonical();
  const auto row_label = canon.labels(Side::rows, m.rows());
  const auto col_label = canon.labels(Side::cols, m.cols());
  Summary s;
  s.meta["format"] = kSummaryFormat;
  s.meta["config"] = config;
  s.meta["seed"] = seed;
  s.meta["cost"] = {{"model", round_sig9(cost.model_cost)},
                    {"loss", round_sig9(cost.loss)},
                    {"total", round_sig9(cost.total)}};

  for (std::size_t k = 0; k < canon.row_clusters.size(); ++k) {
    RowGroup g{ClusterId(k + 1), {}};
    for (auto i : canon.row_clusters[k].members) g.instances.push_back(m.row_meta()[i].id);
    s.rows.push_back(std::move(g));
  }
  for (std::size_t k = 0; k < canon.col_clusters.size(); ++k) {
    ColGroup g{ClusterId(k + 1), {}};
    for (auto j : canon.col_clusters[k].members) g.features.push_back(m.col_meta()[j].id);
    s.cols.push_back(std::move(g));
  }

  // Co-cluster values, grouped by (row cluster, column cluster).
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cells;
  std::vector<std::vector<std::string>> active(m.rows());
  double top = 0.0;
  for (const auto& e : m.entries()) {
    cells[{row_label[e.row], col_label[e.col]}].push_back(e.value);
    active[e.row].push_back(m.col_meta()[e.col].id);
    top = std::max(top, e.value);
  }
  double mass_total = 0.0;
  for (auto& [key, values] : cells) {
    std::sort(values.begin(), values.end(), std::greater<>());
    Block b;
    b.r = ClusterId(key.first + 1);
    b.c = ClusterId(key.second + 1);
    for (double v : values) b.mass += v;
    mass_total += b.mass;
    b.nnz = values.size();
    b.mean = round_sig9(b.mass / double(b.nnz));
    b.mass = round_sig9(b.mass);
    b.hist = detail::equal_count_bins(values, kHistogramBins);
    for (auto& h : b.hist) h = round_sig9(h);
    s.blocks.push_back(std::move(b));
  }
  if (std::abs(mass_total - 1.0) > 1e-9) {
    throw ShapeError("co-cluster masses sum to " + std::to_string(mass_total) + ", not 1");
  }
  std::stable_sort(s.blocks.begin(), s.blocks.end(), [](const Block& x, const Block& y) {
    return x.r != y.r ? x.r < y.r : x.mass > y.mass;
  });

  // Legends: features by descending importance, then by index.
  const auto col_mass = m.col_sums();
  std::vector<std::vector<double>> by_col(m.cols());
  for (const auto& e : m.entries()) by_col[e.col].push_back(e.value);
  for (std::size_t k = 0; k < canon.col_clusters.size(); ++k) {
    auto members = canon.col_clusters[k].members;
    std::stable_sort(members.begin(), members.end(),
                     [&](Index a, Index b) { return col_mass[a] > col_mass[b]; });
    Legend lg{ClusterId(k + 1), {}};
    for (auto j : members) {
      lg.features.push_back({m.col_meta()[j].id, m.col_meta()[j].name, round_sig9(col_mass[j]),
                             detail::equal_width_counts(by_col[j], top, kHistogramBins)});
    }
    s.legends.push_back(std::move(lg));
  }

  std::vector<ClassCount> totals;
  std::map<std::string, std::size_t> class_size;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto& r = m.row_meta()[i];
    s.instances.push_back({r.id, r.label, r.predicted, r.correct, ClusterId(row_label[i] + 1), active[i]});
    ++class_size[r.label];
  }
  for (auto& [cls, n] : class_size) totals.push_back({cls, n, n});
  detail::flows_and_classes(s, totals);
  return s;
}

inline Json to_json(const Summary& s) {
  Json doc;
  doc["meta"] = s.meta;
  Json rows = Json::array();
  for (const auto& r : s.rows) rows.push_back({{"cluster", r.cluster}, {"instances", r.instances}});
  doc["rows"] = std::move(rows);
  Json cols = Json::array();
  for (const auto& c : s.cols) cols.push_back({{"cluster", c.cluster}, {"features", c.features}});
  doc["cols"] = std::move(cols);
  Json blocks = Json::array();
  for (const auto& b : s.blocks) {
    blocks.push_back({{"r", b.r}, {"c", b.c}, {"mass", b.mass}, {"nnz", b.nnz}, {"mean", b.mean}, {"hist", b.hist}});
  }
  doc["blocks"] = std::move(blocks);
  Json flows = Json::array();
  for (const auto& f : s.flows) {
    flows.push_back({{"class", f.cls}, {"cluster", f.cluster}, {"correct", f.correct}, {"incorrect", f.incorrect}});
  }
  doc["flows"] = std::move(flows);
  Json legends = Json::array();
  for (const auto& l : s.legends) {
    Json fs = Json::array();
    for (const auto& f : l.features) {
      fs.push_back({{"id", f.id}, {"name", f.name}, {"importance", f.importance}, {"hist", f.hist}});
    }
    legends.push_back({{"cluster", l.cluster}, {"features", std::move(fs)}});
  }
  doc["legends"] = std::move(legends);
  Json classes = Json::array();
  for (const auto& c : s.classes) classes.push_back({{"class", c.cls}, {"total", c.total}, {"retained", c.retained}});
  doc["classes"] = std::move(classes);
  Json inst = Json::array();
  for (const auto& i : s.instances) {
    inst.push_back({{"id", i.id}, {"class", i.cls}, {"pred", i.pred}, {"correct", i.correct},
                    {"cluster", i.cluster}, {"features", i.features}});
  }
  doc["instances"] = std::move(inst);
  return doc;
}

inline std::string serialize(const Summary& s) { return to_json(s).dump(2) + "\n"; }

inline Summary summary_from_json(const Json& doc) {
  try {
    Summary s;
    s.meta = doc.at("meta");
    if (s.meta.value("format", std::string{}) != kSummaryFormat) {
      throw InputError(std::string("not a ") + kSummaryFormat + " document");
    }
    for (const auto& r : doc.at("rows")) {
      s.rows.push_back({r.at("cluster").get<ClusterId>(), r.at("instances").get<std::vector<std::string>>()});
    }
    for (const auto& c : doc.at("cols")) {
      s.cols.push_back({c.at("cluster").get<ClusterId>(), c.at("features").get<std::vector<std::string>>()});
    }
    for (const auto& b : doc.at("blocks")) {
      s.blocks.push_back({b.at("r").get<ClusterId>(), b.at("c").get<ClusterId>(), b.at("mass").get<double>(),
                          b.at("nnz").get<std::size_t>(), b.at("mean").get<double>(),
                          b.at("hist").get<std::vector<double>>()});
    }
    for (const auto& f : doc.at("flows")) {
      s.flows.push_back({f.at("class").get<std::string>(), f.at("cluster").get<ClusterId>(),
                         f.at("correct").get<std::size_t>(), f.at("incorrect").get<std::size_t>()});
    }
    for (const auto& l : doc.at("legends")) {
      Legend lg{l.at("cluster").get<ClusterId>(), {}};
      for (const auto& f : l.at("features")) {
        lg.features.push_back({f.at("id").get<std::string>(), f.at("name").get<std::string>(),
                               f.at("importance").get<double>(), f.at("hist").get<std::vector<std::size_t>>()});
      }
      s.legends.push_back(std::move(lg));
    }
    for (const auto& c : doc.at("classes")) {
      s.classes.push_back({c.at("class").get<std::string>(), c.at("total").get<std::size_t>(),
                           c.at("retained").get<std::size_t>()});
    }
    for (const auto& i : doc.at("instances")) {
      s.instances.push_back({i.at("id").get<std::string>(), i.at("class").get<std::string>(),
                             i.at("pred").get<std::string>(), i.at("correct").get<bool>(),
                             i.at("cluster").get<ClusterId>(), i.at("features").get<std::vector<std::string>>()});
    }
    return s;
  } catch (const Json::exception& e) {
    throw InputError(std::string("summary-json: ") + e.what());
  }
}

enum class Outcome { any, correct, incorrect };

struct FilterSpec {
  std::optional<std::vector<std::string>> classes;
  std::optional<std::vector<std::string>> features;  // ids or names
  Outcome outcome = Outcome::any;
  std::size_t min_cluster_size = 0;
  double min_mean_value = 0.0;
};

/// Parses a filter request; malformed or unknown fields are InputError.
inline FilterSpec filter_spec_from_json(const Json& doc) {
  if (doc.is_null()) return {};
  if (!doc.is_object()) throw InputError("filter spec must be a JSON object");
  FilterSpec spec;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "classes") {
        spec.classes = value.get<std::vector<std::string>>();
      } else if (key == "features") {
        spec.features = value.get<std::vector<std::string>>();
      } else if (key == "outcome") {
        const auto o = value.get<std::string>();
        if (o == "any") spec.outcome = Outcome::any;
        else if (o == "correct") spec.outcome = Outcome::correct;
        else if (o == "incorrect") spec.outcome = Outcome::incorrect;
        else throw InputError("outcome must be any|correct|incorrect");
      } else if (key == "min_cluster_size") {
        if (!value.is_number_unsigned()) throw InputError("min_cluster_size must be a nonnegative integer");
        spec.min_cluster_size = value.get<std::size_t>();
      } else if (key == "min_mean_value") {
        if (!value.is_number()) throw InputError("min_mean_value must be a number");
        spec.min_mean_value = value.get<double>();
        if (!(spec.min_mean_value >= 0.0)) throw InputError("min_mean_value must be nonnegative");
      } else {
        throw InputError("unknown filter field '" + key + "'");
      }
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("filter spec: ") + e.what());
  }
  return spec;
}

/// Instance predicate first, then cluster thresholds; flows and retained
/// class counts are recomputed over what remains. The input is untouched.
inline Summary apply_filter(const Summary& s, const FilterSpec& spec) {
  std::set<std::string> class_filter, feature_filter;
  if (spec.classes) {
    std::set<std::string> known;
    for (const auto& c : s.classes) known.insert(c.cls);
    std::vector<std::string> missing;
    for (const auto& c : *spec.classes) {
      if (!known.count(c)) missing.push_back(c);
      class_filter.insert(c);
    }
    if (!missing.empty()) throw NotFound("unknown classes", missing);
  }
  if (spec.features) {
    std::unordered_map<std::string, std::string> by_name;  // id or name -> id
    for (const auto& l : s.legends)
      for (const auto& f : l.features) {
        by_name.emplace(f.name, f.id);
        by_name[f.id] = f.id;
      }
    std::vector<std::string> missing;
    for (const auto& f : *spec.features) {
      auto it = by_name.find(f);
      if (it == by_name.end()) {
        missing.push_back(f);
      } else {
        feature_filter.insert(it->second);
      }
    }
    if (!missing.empty()) throw NotFound("unknown features", missing);
  }

  auto keep = [&](const Instance& i) {
    if (spec.classes && !class_filter.count(i.cls)) return false;
    if (spec.outcome == Outcome::correct && !i.correct) return false;
    if (spec.outcome == Outcome::incorrect && i.correct) return false;
    if (spec.features) {
      return std::any_of(i.features.begin(), i.features.end(),
                         [&](const std::string& f) { return feature_filter.count(f) != 0; });
    }
    return true;
  };
  std::set<std::string> retained;
  for (const auto& i : s.instances)
    if (keep(i)) retained.insert(i.id);

  Summary out;
  out.meta = s.meta;
  out.cols = s.cols;
  out.legends = s.legends;
  std::set<ClusterId> visible;
  for (const auto& r : s.rows) {
    RowGroup g{r.cluster, {}};
    for (const auto& id : r.instances)
      if (retained.count(id)) g.instances.push_back(id);
    if (g.instances.empty() || g.instances.size() < spec.min_cluster_size) continue;
    const bool any_block = std::any_of(s.blocks.begin(), s.blocks.end(), [&](const Block& b) {
      return b.r == r.cluster && b.mean >= spec.min_mean_value;
    });
    if (!any_block) continue;
    visible.insert(r.cluster);
    out.rows.push_back(std::move(g));
  }
  for (const auto& b : s.blocks) {
    if (visible.count(b.r) && b.mean >= spec.min_mean_value) out.blocks.push_back(b);
  }
  for (const auto& i : s.instances) {
    if (retained.count(i.id) && visible.count(i.cluster)) out.instances.push_back(i);
  }
  detail::flows_and_classes(out, s.classes);
  return out;
}

struct SubsetEntry {
  std::string instance;
  std::string feature;
  double value = 0.0;
  friend bool operator==(const SubsetEntry&, const SubsetEntry&) = default;
};

struct Subset {
  std::vector<Instance> instances;
  std::vector<std::string> features;
  std::vector<SubsetEntry> entries;
};

/// Entries of `m` inside row cluster `r` (and column cluster `c` when
/// given) whose value is at least `threshold`.
inline Subset extract_subset(const Summary& s, const ExplanationMatrix& m, ClusterId r,
                             std::optional<ClusterId> c = std::nullopt, double threshold = 0.0) {
  auto row = std::find_if(s.rows.begin(), s.rows.end(), [&](const RowGroup& g) { return g.cluster == r; });
  if (row == s.rows.end()) throw NotFound("unknown row cluster " + std::to_string(r));
  std::vector<std::string> features;
  if (c) {
    auto col = std::find_if(s.cols.begin(), s.cols.end(), [&](const ColGroup& g) { return g.cluster == *c; });
    if (col == s.cols.end()) throw NotFound("unknown column cluster " + std::to_string(*c));
    features = col->features;
  } else {
    for (const auto& g : s.cols) features.insert(features.end(), g.features.begin(), g.features.end());
  }
  // Class totals and column groups survive filtering, so they pin the shape.
  std::size_t n_rows = 0, n_cols = 0;
  for (const auto& k : s.classes) n_rows += k.total;
  for (const auto& g : s.cols) n_cols += g.features.size();
  if (n_rows != m.rows() || n_cols != m.cols()) {
    throw ShapeError("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " but the summary describes " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
  }
  std::unordered_map<std::string, Index> row_index, col_index;
  for (std::size_t i = 0; i < m.rows(); ++i) row_index[m.row_meta()[i].id] = Index(i);
  for (std::size_t j = 0; j < m.cols(); ++j) col_index[m.col_meta()[j].id] = Index(j);
  std::vector<char> in_cols(m.cols(), 0);
  for (const auto& f : features) {
    auto it = col_index.find(f);
    if (it == col_index.end()) throw ShapeError("summary feature " + f + " is not in the matrix");
    in_cols[it->second] = 1;
  }
  std::unordered_map<std::string, const Instance*> meta;
  for (const auto& i : s.instances) meta[i.id] = &i;

  Subset out;
  out.features = features;
  for (const auto& id : row->instances) {
    auto it = row_index.find(id);
    if (it == row_index.end()) throw ShapeError("summary instance " + id + " is not in the matrix");
    auto mi = meta.find(id);
    if (mi != meta.end()) {
      out.instances.push_back(*mi->second);
    } else {
      const auto& rm = m.row_meta()[it->second];
      out.instances.push_back({rm.id, rm.label, rm.predicted, rm.correct, r, {}});
    }
    for (const auto& e : m.row(it->second)) {
      if (in_cols[e.col] && e.value >= threshold) {
        out.entries.push_back({id, m.col_meta()[e.col].id, e.value});
      }
    }
  }
  return out;
}

inline Json to_json(const Subset& s) {
  Json doc;
  Json inst = Json::array();
  for (const auto& i : s.instances) {
    inst.push_back({{"id", i.id}, {"class", i.cls}, {"pred", i.pred}, {"correct", i.correct}});
  }
  doc["instances"] = std::move(inst);
  doc["features"] = s.features;
  Json es = Json::array();
  for (const auto& e : s.entries) {
    es.push_back({{"instance", e.instance}, {"feature", e.feature}, {"value", round_sig9(e.value)}});
  }
  doc["entries"] = std::move(es);
  return doc;
}

}  // namespace melody
