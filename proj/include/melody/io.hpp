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

// explmat-json v1:
//   {"shape":[m,n], "entries":[[r,c,v],...],
//    "rows":[{"id","class","pred"[,"correct"]}], "cols":[{"id","name"[,"group"]}]}

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "melody/matrix.hpp"

namespace melody {

using Json = nlohmann::ordered_json;

// Rounds to 9 significant decimal digits so serialized documents are stable
// under parse/serialize round trips.
inline double round_sig9(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  // Same digits as printf("%.9g"), without the locale-aware slow path.
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9).ptr;
  double out = v;
  std::from_chars(buf, end, out);
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed for " + path.string());
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

inline RawMatrix explmat_from_json(const Json& doc) {
  try {
    RawMatrix raw;
    const auto& shape = doc.at("shape");
    if (!shape.is_array() || shape.size() != 2) throw InputError("shape must be [m, n]");
    raw.rows = shape[0].get<std::size_t>();
    raw.cols = shape[1].get<std::size_t>();
    for (const auto& e : doc.at("entries")) {
      if (!e.is_array() || e.size() != 3) throw InputError("entries must be [row, col, value]");
      const auto r = e[0].get<std::int64_t>();
      const auto c = e[1].get<std::int64_t>();
      if (r < 0 || c < 0 || std::size_t(r) >= raw.rows || std::size_t(c) >= raw.cols) {
        throw InputError("entry index outside shape");
      }
      raw.entries.push_back({static_cast<Index>(r), static_cast<Index>(c), e[2].get<double>()});
    }
    if (doc.contains("rows")) {
      for (const auto& r : doc.at("rows")) {
        RowMeta meta;
        meta.id = r.at("id").get<std::string>();
        meta.label = r.value("class", std::string{});
        meta.predicted = r.value("pred", meta.label);
        meta.correct = r.contains("correct") ? r.at("correct").get<bool>()
                                             : meta.label == meta.predicted;
        raw.row_meta.push_back(std::move(meta));
      }
      if (raw.row_meta.size() != raw.rows) throw InputError("rows metadata length != shape[0]");
    }
    if (doc.contains("cols")) {
      for (const auto& c : doc.at("cols")) {
        ColMeta meta;
        meta.id = c.at("id").get<std::string>();
        meta.name = c.value("name", meta.id);
        if (c.contains("group") && !c.at("group").is_null()) {
          meta.group = c.at("group").get<std::string>();
        }
        raw.col_meta.push_back(std::move(meta));
      }
      if (raw.col_meta.size() != raw.cols) throw InputError("cols metadata length != shape[1]");
    }
    return raw;
  } catch (const Json::exception& e) {
    throw InputError(std::string("explmat-json: ") + e.what());
  }
}

inline RawMatrix load_explmat(const std::filesystem::path& path) {
  return explmat_from_json(parse_json(read_text_file(path), path.string()));
}

inline Json explmat_to_json(std::size_t rows, std::size_t cols, std::span<const Entry> entries,
                            const std::vector<RowMeta>& row_meta,
                            const std::vector<ColMeta>& col_meta) {
  Json doc;
  doc["shape"] = {rows, cols};
  Json es = Json::array();
  for (const auto& e : entries) es.push_back({e.row, e.col, round_sig9(e.value)});
  doc["entries"] = std::move(es);
  Json rs = Json::array();
  for (const auto& r : row_meta) {
    rs.push_back({{"id", r.id}, {"class", r.label}, {"pred", r.predicted}, {"correct", r.correct}});
  }
  doc["rows"] = std::move(rs);
  Json cs = Json::array();
  for (const auto& c : col_meta) {
    Json j = {{"id", c.id}, {"name", c.name}};
    if (c.group) j["group"] = *c.group;
    cs.push_back(std::move(j));
  }
  doc["cols"] = std::move(cs);
  return doc;
}

inline Json explmat_to_json(const RawMatrix& m) {
  auto rows = m.row_meta.empty() ? default_row_meta(m.rows) : m.row_meta;
  auto cols = m.col_meta.empty() ? default_col_meta(m.cols) : m.col_meta;
  return explmat_to_json(m.rows, m.cols, m.entries, rows, cols);
}

inline Json explmat_to_json(const ExplanationMatrix& m) {
  return explmat_to_json(m.rows(), m.cols(), m.entries(), m.row_meta(), m.col_meta());
}

}  // namespace melody
