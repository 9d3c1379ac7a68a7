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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "melody/error.hpp"

namespace melody {

using Index = std::uint32_t;

struct Entry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

struct RowMeta {
  std::string id;
  std::string label;
  std::string predicted;
  bool correct = true;
};

struct ColMeta {
  std::string id;
  std::string name;
  std::optional<std::string> group;
};

// Unvalidated input: any sign, explicit zeros and repeated coordinates are
// all allowed here. normalize() turns it into an ExplanationMatrix.
struct RawMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;
  std::vector<RowMeta> row_meta;
  std::vector<ColMeta> col_meta;
};

inline std::vector<RowMeta> default_row_meta(std::size_t n) {
  std::vector<RowMeta> meta(n);
  for (std::size_t i = 0; i < n; ++i) meta[i].id = "r" + std::to_string(i + 1);
  return meta;
}

inline std::vector<ColMeta> default_col_meta(std::size_t n) {
  std::vector<ColMeta> meta(n);
  for (std::size_t j = 0; j < n; ++j) {
    meta[j].id = "c" + std::to_string(j + 1);
    meta[j].name = meta[j].id;
  }
  return meta;
}

/// Sparse nonnegative instance x feature matrix of local explanations.
///
/// Entries are kept in row-major order with a secondary column-major index,
/// so both row slices and column slices can be walked without copying.
/// Every stored value is strictly positive and each coordinate appears once.
class ExplanationMatrix {
 public:
  ExplanationMatrix() = default;

  ExplanationMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries,
                    std::vector<RowMeta> row_meta = {}, std::vector<ColMeta> col_meta = {})
      : rows_(rows), cols_(cols), entries_(std::move(entries)),
        row_meta_(std::move(row_meta)), col_meta_(std::move(col_meta)) {
    if (row_meta_.empty()) row_meta_ = default_row_meta(rows_);
    if (col_meta_.empty()) col_meta_ = default_col_meta(cols_);
    if (row_meta_.size() != rows_ || col_meta_.size() != cols_) {
      throw ShapeError("metadata length does not match matrix shape");
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const auto& e = entries_[k];
      if (e.row >= rows_ || e.col >= cols_) throw ShapeError("entry index outside matrix shape");
      if (!(e.value > 0.0) || !std::isfinite(e.value)) {
        throw InputError("explanation values must be finite and strictly positive");
      }
      if (k > 0 && entries_[k - 1].row == e.row && entries_[k - 1].col == e.col) {
        throw InputError("duplicate coordinate (" + std::to_string(e.row) + ", " +
                         std::to_string(e.col) + ")");
      }
    }
    build_indices();
    if (rows_ > 0 && cols_ > 0 && density() > 0.5) {
      spdlog::warn("explanation matrix density {:.3f} exceeds 0.5; summaries assume sparsity",
                   density());
    }
  }

  static ExplanationMatrix from_dense(const std::vector<std::vector<double>>& dense) {
    const std::size_t m = dense.size();
    const std::size_t n = m == 0 ? 0 : dense.front().size();
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < m; ++i) {
      if (dense[i].size() != n) throw ShapeError("ragged dense matrix");
      for (std::size_t j = 0; j < n; ++j) {
        if (dense[i][j] != 0.0) {
          entries.push_back({static_cast<Index>(i), static_cast<Index>(j), dense[i][j]});
        }
      }
    }
    return ExplanationMatrix(m, n, std::move(entries));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  double density() const {
    return rows_ * cols_ == 0 ? 0.0 : static_cast<double>(nnz()) / (double(rows_) * double(cols_));
  }

  std::span<const Entry> entries() const { return entries_; }
  std::span<const Entry> row(std::size_t i) const {
    return std::span<const Entry>(entries_).subspan(row_offsets_[i],
                                                     row_offsets_[i + 1] - row_offsets_[i]);
  }
  // Positions into entries() of column j's nonzeros, ordered by row.
  std::span<const std::size_t> col_positions(std::size_t j) const {
    return std::span<const std::size_t>(col_order_).subspan(col_offsets_[j],
                                                             col_offsets_[j + 1] - col_offsets_[j]);
  }

  const std::vector<RowMeta>& row_meta() const { return row_meta_; }
  const std::vector<ColMeta>& col_meta() const { return col_meta_; }

  double total() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value;
    return s;
  }
  std::vector<double> row_sums() const {
    std::vector<double> s(rows_, 0.0);
    for (const auto& e : entries_) s[e.row] += e.value;
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(cols_, 0.0);
    for (const auto& e : entries_) s[e.col] += e.value;
    return s;
  }

  bool is_normalized(double tol = 1e-9) const { return std::abs(total() - 1.0) <= tol; }

  // Value at (i, j), zero when absent.
  double at(std::size_t i, std::size_t j) const {
    auto r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j,
                               [](const Entry& e, std::size_t c) { return e.col < c; });
    return (it != r.end() && it->col == j) ? it->value : 0.0;
  }

  // Copy with the same shape and metadata but new values; entries that drop
  // to zero are removed.
  ExplanationMatrix with_values(std::vector<Entry> entries) const {
    std::erase_if(entries, [](const Entry& e) { return e.value == 0.0; });
    return ExplanationMatrix(rows_, cols_, std::move(entries), row_meta_, col_meta_);
  }

 private:
  void build_indices() {
    row_offsets_.assign(rows_ + 1, 0);
    col_offsets_.assign(cols_ + 1, 0);
    for (const auto& e : entries_) {
      ++row_offsets_[e.row + 1];
      ++col_offsets_[e.col + 1];
    }
    std::partial_sum(row_offsets_.begin(), row_offsets_.end(), row_offsets_.begin());
    std::partial_sum(col_offsets_.begin(), col_offsets_.end(), col_offsets_.begin());
    col_order_.resize(entries_.size());
    std::vector<std::size_t> cursor(col_offsets_.begin(), col_offsets_.end() - 1);
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      col_order_[cursor[entries_[k].col]++] = k;
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_offsets_{0};
  std::vector<std::size_t> col_order_;
  std::vector<RowMeta> row_meta_;
  std::vector<ColMeta> col_meta_;
};

enum class Scaling { global, per_feature };

struct NormalizeOptions {
  bool signed_values = false;  // take absolute values first
  Scaling scaling = Scaling::global;
};

inline constexpr double kNoiseFloor = 1e-12;

namespace detail {

inline std::vector<Entry> drop_and_rescale(std::vector<Entry> entries) {
  double total = 0.0;
  for (const auto& e : entries) total += e.value;
  if (!(total > 0.0)) throw EmptyMatrix();
  for (auto& e : entries) e.value /= total;
  const auto before = entries.size();
  std::erase_if(entries, [](const Entry& e) { return e.value < kNoiseFloor; });
  if (entries.empty()) throw EmptyMatrix();
  if (entries.size() != before) {
    total = 0.0;
    for (const auto& e : entries) total += e.value;
    for (auto& e : entries) e.value /= total;
  }
  return entries;
}

}  // namespace detail

/// Min-max scales the matrix (over all m*n cells, so the implicit zeros anchor
/// the minimum of a sparse matrix) and divides by the grand total.
///
/// Repeated coordinates are summed first. With `signed_values` the absolute
/// value is used; otherwise a negative value is an input error.
inline ExplanationMatrix normalize(const RawMatrix& raw, const NormalizeOptions& opts = {}) {
  std::vector<Entry> merged;
  merged.reserve(raw.entries.size());
  for (auto e : raw.entries) {
    if (e.row >= raw.rows || e.col >= raw.cols) throw ShapeError("entry index outside matrix shape");
    if (!std::isfinite(e.value)) throw InputError("non-finite explanation value");
    if (e.value < 0.0) {
      if (!opts.signed_values) {
        throw InputError("negative explanation value; pass signed_values to use magnitudes");
      }
    }
    merged.push_back(e);
  }
  std::sort(merged.begin(), merged.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Entry> summed;
  for (const auto& e : merged) {
    if (!summed.empty() && summed.back().row == e.row && summed.back().col == e.col) {
      summed.back().value += e.value;
    } else {
      summed.push_back(e);
    }
  }
  for (auto& e : summed) e.value = opts.signed_values ? std::abs(e.value) : e.value;
  std::erase_if(summed, [](const Entry& e) { return e.value == 0.0; });
  if (summed.empty()) throw EmptyMatrix();

  auto scale = [](std::vector<Entry*>& group, std::size_t cells) {
    double lo = group.front()->value, hi = lo;
    for (auto* e : group) {
      lo = std::min(lo, e->value);
      hi = std::max(hi, e->value);
    }
    if (group.size() < cells) lo = 0.0;  // implicit zeros present
    const double range = hi - lo;
    for (auto* e : group) e->value = range > 0.0 ? (e->value - lo) / range : 1.0;
  };

  if (opts.scaling == Scaling::global) {
    std::vector<Entry*> all;
    for (auto& e : summed) all.push_back(&e);
    scale(all, raw.rows * raw.cols);
  } else {
    std::vector<std::vector<Entry*>> by_col(raw.cols);
    for (auto& e : summed) by_col[e.col].push_back(&e);
    for (auto& g : by_col) {
      if (!g.empty()) scale(g, raw.rows);
    }
  }
  std::erase_if(summed, [](const Entry& e) { return e.value == 0.0; });
  auto entries = detail::drop_and_rescale(std::move(summed));
  return ExplanationMatrix(raw.rows, raw.cols, std::move(entries),
                           raw.row_meta.empty() ? default_row_meta(raw.rows) : raw.row_meta,
                           raw.col_meta.empty() ? default_col_meta(raw.cols) : raw.col_meta);
}

inline ExplanationMatrix normalize(const ExplanationMatrix& m, const NormalizeOptions& opts = {}) {
  RawMatrix raw{m.rows(), m.cols(), {m.entries().begin(), m.entries().end()}, m.row_meta(),
                m.col_meta()};
  return normalize(raw, opts);
}

// Divides by the total without min-max scaling.
inline ExplanationMatrix renormalize(const ExplanationMatrix& m) {
  auto entries = detail::drop_and_rescale({m.entries().begin(), m.entries().end()});
  return m.with_values(std::move(entries));
}

}  // namespace melody
