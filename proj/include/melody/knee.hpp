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

// Knee detection on the sorted explanation-value curve and the smoothing
// step that caps outlying values at the knee.

#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "melody/matrix.hpp"

namespace melody {

struct ValueDistribution {
  std::vector<double> sorted_values;  // non-increasing
  std::optional<std::size_t> knee_index;
  std::optional<double> cap_value;

  static ValueDistribution of(const ExplanationMatrix& m) {
    ValueDistribution d;
    d.sorted_values.reserve(m.nnz());
    for (const auto& e : m.entries()) d.sorted_values.push_back(e.value);
    std::sort(d.sorted_values.begin(), d.sorted_values.end(), std::greater<>());
    return d;
  }
};

// Which side of the chord from the first to the last point the curve bulges to.
enum class KneeShape { concave, convex };

/// Kneedle on a non-increasing curve y(i) with x = i / (N - 1).
///
/// The difference curve is the normalized distance to the chord; a local
/// maximum becomes the knee once the curve drops below
/// `D_max - sensitivity / (N - 1)` before the next local maximum. Local
/// maxima that do not lie strictly on the `shape` side of the chord are
/// ignored.
inline std::optional<std::size_t> kneedle_index(std::span<const double> desc, double sensitivity,
                                                KneeShape shape) {
  const std::size_t n = desc.size();
  if (n < 3) return std::nullopt;
  const double hi = desc.front();
  const double lo = desc.back();
  if (!(hi > lo)) return std::nullopt;

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    const double y = (desc[i] - lo) / (hi - lo);
    diff[i] = shape == KneeShape::concave ? y - (1.0 - x) : (1.0 - x) - y;
  }
  const double step = 1.0 / static_cast<double>(n - 1);

  std::optional<std::size_t> candidate;
  double threshold = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const bool is_max = diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];
    const bool is_min = diff[i] < diff[i - 1] && diff[i] <= diff[i + 1];
    if (is_max) {
      if (diff[i] > 0.0) {
        candidate = i;
        threshold = diff[i] - sensitivity * step;
      } else {
        candidate.reset();
      }
    } else if (is_min && candidate) {
      threshold = 0.0;
    }
    if (candidate && diff[i + 1] < threshold) return candidate;
  }
  return std::nullopt;
}

/// Knee of the value distribution: the end of a high plateau when the curve
/// starts concave, otherwise the elbow of a convex (heavy-headed) curve.
/// Returns the value at the knee, or nothing when the curve has fewer than
/// three distinct values or no knee clears the sensitivity threshold.
inline std::optional<double> find_knee(ValueDistribution& dist, double sensitivity = 1.0) {
  dist.knee_index.reset();
  dist.cap_value.reset();
  const auto& v = dist.sorted_values;
  std::size_t distinct = v.empty() ? 0 : 1;
  for (std::size_t i = 1; i < v.size() && distinct < 3; ++i) {
    if (v[i] != v[i - 1]) ++distinct;
  }
  if (distinct < 3) return std::nullopt;
  auto idx = kneedle_index(v, sensitivity, KneeShape::concave);
  if (!idx) idx = kneedle_index(v, sensitivity, KneeShape::convex);
  if (!idx) return std::nullopt;
  dist.knee_index = idx;
  dist.cap_value = v[*idx];
  return v[*idx];
}

inline std::optional<double> find_knee(const ValueDistribution& dist, double sensitivity = 1.0) {
  ValueDistribution copy = dist;
  return find_knee(copy, sensitivity);
}

// Replaces every value above `cap` by `cap`, then divides by the new total.
inline ExplanationMatrix cap_values(const ExplanationMatrix& m, double cap) {
  std::vector<Entry> entries(m.entries().begin(), m.entries().end());
  for (auto& e : entries) e.value = std::min(e.value, cap);
  return renormalize(m.with_values(std::move(entries)));
}

inline ExplanationMatrix smooth(const ExplanationMatrix& m, double sensitivity = 1.0) {
  auto dist = ValueDistribution::of(m);
  const auto knee = find_knee(dist, sensitivity);
  if (!knee || *knee >= dist.sorted_values.front()) return m;
  spdlog::debug("smoothing: capping {} values at knee {:.6g}",
                std::count_if(dist.sorted_values.begin(), dist.sorted_values.end(),
                              [&](double v) { return v > *knee; }),
                *knee);
  return cap_values(m, *knee);
}

}  // namespace melody
