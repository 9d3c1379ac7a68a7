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

// Transforms that turn raw tabular/text exports into explanation matrices:
// quantile discretization of tabular attributes into one-hot "logic"
// columns, and max-pooling of word importances into topic importances.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "melody/io.hpp"
#include "melody/matrix.hpp"

namespace melody {

enum class AttributeKind { numeric, ordinal, categorical };

struct Column {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  std::vector<std::string> values;
};

struct Table {
  std::vector<Column> columns;
  std::vector<std::string> row_ids;  // optional

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().values.size(); }
};

// How one attribute maps onto logic columns. Numeric/ordinal attributes carry
// quantile edges (bins [e_k, e_k+1), last bin closed); categorical ones carry
// their levels.
struct AttributeEncoding {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  std::vector<double> edges;
  std::vector<std::string> levels;
  std::size_t first_column = 0;

  std::size_t width() const {
    return kind == AttributeKind::categorical ? levels.size()
                                              : std::max<std::size_t>(edges.size(), 2) - 1;
  }
};

struct LogicMatrix {
  std::size_t rows = 0;
  std::vector<std::string> names;
  std::vector<AttributeEncoding> attributes;
  std::vector<std::vector<Index>> active;  // per row, active logic columns
  std::vector<std::string> row_ids;

  RawMatrix to_raw() const {
    RawMatrix raw;
    raw.rows = rows;
    raw.cols = names.size();
    for (std::size_t i = 0; i < rows; ++i) {
      for (auto c : active[i]) raw.entries.push_back({static_cast<Index>(i), c, 1.0});
    }
    raw.row_meta = default_row_meta(rows);
    for (std::size_t i = 0; i < row_ids.size() && i < rows; ++i) raw.row_meta[i].id = row_ids[i];
    raw.col_meta.resize(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
      raw.col_meta[j].id = "f" + std::to_string(j);
      raw.col_meta[j].name = names[j];
    }
    for (const auto& a : attributes) {
      for (std::size_t k = 0; k < a.width(); ++k) raw.col_meta[a.first_column + k].group = a.name;
    }
    return raw;
  }
};

// Sturges: ceil(1 + log2 N) bins.
inline std::size_t sturges_bins(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(1.0 + std::log2(static_cast<double>(std::max<std::size_t>(n, 1)))));
}

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline double parse_number(const std::string& s, const std::string& attr) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("attribute '" + attr + "': '" + s + "' is not numeric");
  }
}

inline std::string format_edge(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::size_t bin_of(const std::vector<double>& edges, double v) {
  if (edges.size() < 2) return 0;
  const std::size_t bins = edges.size() - 1;
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
  return std::min(b, bins - 1);
}

}  // namespace detail

/// One-hot encodes `table` against previously fitted attribute encodings.
/// Values outside the fitted range fall into the first or last bin.
inline LogicMatrix encode_tabular(const Table& table, const std::vector<AttributeEncoding>& attrs) {
  LogicMatrix out;
  out.rows = table.rows();
  out.attributes = attrs;
  out.row_ids = table.row_ids;
  out.active.assign(out.rows, {});
  for (const auto& a : attrs) {
    if (a.kind == AttributeKind::categorical) {
      for (const auto& lvl : a.levels) out.names.push_back(a.name + " = " + lvl);
    } else if (a.edges.size() < 2) {
      out.names.push_back(a.name + " ∈ [" + detail::format_edge(a.edges.front()) + "," +
                          detail::format_edge(a.edges.front()) + "]");
    } else {
      for (std::size_t k = 0; k + 1 < a.edges.size(); ++k) {
        const bool last = k + 2 == a.edges.size();
        out.names.push_back(a.name + " ∈ [" + detail::format_edge(a.edges[k]) + "," +
                            detail::format_edge(a.edges[k + 1]) + (last ? "]" : ")"));
      }
    }
  }
  for (const auto& a : attrs) {
    auto col = std::find_if(table.columns.begin(), table.columns.end(),
                            [&](const Column& c) { return c.name == a.name; });
    if (col == table.columns.end()) throw InputError("table lacks attribute '" + a.name + "'");
    for (std::size_t i = 0; i < out.rows; ++i) {
      std::size_t k = 0;
      if (a.kind == AttributeKind::categorical) {
        auto it = std::find(a.levels.begin(), a.levels.end(), col->values[i]);
        if (it == a.levels.end()) {
          throw InputError("attribute '" + a.name + "': unseen level '" + col->values[i] + "'");
        }
        k = static_cast<std::size_t>(it - a.levels.begin());
      } else {
        k = detail::bin_of(a.edges, detail::parse_number(col->values[i], a.name));
      }
      out.active[i].push_back(static_cast<Index>(a.first_column + k));
    }
  }
  for (auto& row : out.active) std::sort(row.begin(), row.end());
  return out;
}

/// Fits quantile bins (Sturges' bin count, edges from this table's values)
/// and categorical levels, then one-hot encodes the table. Exactly one
/// column per attribute is active in every row.
inline LogicMatrix discretize_tabular(const Table& table) {
  const std::size_t n = table.rows();
  if (n == 0) throw InputError("table has no rows");
  std::vector<AttributeEncoding> attrs;
  std::size_t next = 0;
  for (const auto& col : table.columns) {
    if (col.values.size() != n) throw InputError("ragged table column '" + col.name + "'");
    AttributeEncoding a;
    a.name = col.name;
    a.kind = col.kind;
    a.first_column = next;
    if (col.kind == AttributeKind::categorical) {
      std::set<std::string> levels(col.values.begin(), col.values.end());
      a.levels.assign(levels.begin(), levels.end());
    } else {
      std::vector<double> sorted;
      sorted.reserve(n);
      for (const auto& s : col.values) sorted.push_back(detail::parse_number(s, col.name));
      std::sort(sorted.begin(), sorted.end());
      const std::size_t bins = sturges_bins(n);
      for (std::size_t k = 0; k <= bins; ++k) {
        a.edges.push_back(quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(bins)));
      }
      a.edges.erase(std::unique(a.edges.begin(), a.edges.end()), a.edges.end());
      if (a.edges.size() < 2) {
        spdlog::warn("attribute '{}' is constant; encoded as a single degenerate bin", col.name);
      }
    }
    next += a.width();
    attrs.push_back(std::move(a));
  }
  return encode_tabular(table, attrs);
}

// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

/// Reads a CSV with a header row; `schema` is
/// {"id": optional column name, "attributes": [{"name", "type"}...]} with
/// type one of numeric / ordinal / categorical. Columns absent from the
/// schema are ignored.
inline Table read_tabular_csv(const std::string& csv_text, const Json& schema) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV is empty; header row required");
  const auto header = split_csv_line(line);
  std::vector<std::vector<std::string>> records;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto rec = split_csv_line(line);
    if (rec.size() != header.size()) throw InputError("CSV row width differs from header");
    records.push_back(std::move(rec));
  }
  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  Table t;
  try {
    if (schema.contains("id")) {
      const auto idx = column_index(schema.at("id").get<std::string>());
      for (const auto& r : records) t.row_ids.push_back(r[idx]);
    }
    for (const auto& attr : schema.at("attributes")) {
      Column c;
      c.name = attr.at("name").get<std::string>();
      const auto type = attr.at("type").get<std::string>();
      if (type == "numeric") c.kind = AttributeKind::numeric;
      else if (type == "ordinal") c.kind = AttributeKind::ordinal;
      else if (type == "categorical") c.kind = AttributeKind::categorical;
      else throw InputError("unknown attribute type '" + type + "'");
      const auto idx = column_index(c.name);
      for (const auto& r : records) c.values.push_back(r[idx]);
      t.columns.push_back(std::move(c));
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("schema: ") + e.what());
  }
  return t;
}

/// Collapses word columns into topic columns; a topic's value for an
/// instance is the maximum of its member words' values. Topics are ordered
/// by first appearance over the word columns. The result is renormalized.
inline ExplanationMatrix aggregate_topics(const ExplanationMatrix& words,
                                          const std::map<std::string, std::string>& word_to_topic) {
  std::vector<std::string> offenders;
  std::vector<std::string> topics;
  std::unordered_map<std::string, Index> topic_index;
  std::vector<Index> col_topic(words.cols());
  for (std::size_t j = 0; j < words.cols(); ++j) {
    const auto& id = words.col_meta()[j].id;
    auto it = word_to_topic.find(id);
    if (it == word_to_topic.end()) {
      offenders.push_back(id);
      continue;
    }
    auto [pos, inserted] = topic_index.emplace(it->second, static_cast<Index>(topics.size()));
    if (inserted) topics.push_back(it->second);
    col_topic[j] = pos->second;
  }
  if (!offenders.empty()) throw UnmappedFeature(std::move(offenders));

  std::vector<Entry> pooled;
  for (std::size_t i = 0; i < words.rows(); ++i) {
    std::map<Index, double> best;
    for (const auto& e : words.row(i)) {
      auto& v = best[col_topic[e.col]];
      v = std::max(v, e.value);
    }
    for (auto [t, v] : best) pooled.push_back({static_cast<Index>(i), t, v});
  }
  std::vector<ColMeta> meta(topics.size());
  for (std::size_t t = 0; t < topics.size(); ++t) {
    meta[t].id = topics[t];
    meta[t].name = topics[t];
  }
  ExplanationMatrix m(words.rows(), topics.size(), std::move(pooled), words.row_meta(), meta);
  return renormalize(m);
}

}  // namespace melody
