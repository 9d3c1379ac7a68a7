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

// Spectral co-clustering used as a cold start for the merge engine.
//
// The bipartite graph E is degree-normalized to A = D1^-1/2 E D2^-1/2. Its
// leading singular vectors after the trivial first one, rescaled by
// D^-1/2, embed rows and columns in a common low-dimensional space where
// k-means separates weakly connected blocks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <spdlog/spdlog.h>

#include "melody/clustering.hpp"
#include "melody/error.hpp"
#include "melody/matrix.hpp"

namespace melody {

using SparseRowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SvdResult {
  Eigen::MatrixXd u;  // m x l
  Eigen::VectorXd s;  // l, non-increasing
  Eigen::MatrixXd v;  // n x l
  double residual = 0.0;  // max_i ||A v_i - s_i u_i||
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, SvdResult partial)
      : Error("truncated SVD did not converge (residual " + std::to_string(residual) + ")"),
        residual_(residual), partial_(std::move(partial)) {}
  double residual() const { return residual_; }
  const SvdResult& partial() const { return partial_; }

 private:
  double residual_;
  SvdResult partial_;
};

inline SparseRowMajor to_eigen(const ExplanationMatrix& m) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(m.nnz());
  for (const auto& e : m.entries()) t.emplace_back(e.row, e.col, e.value);
  SparseRowMajor a(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// A = D1^-1/2 E D2^-1/2 with D1, D2 the row and column sums of E.
inline SparseRowMajor degree_normalize(const SparseRowMajor& e) {
  Eigen::VectorXd d1 = Eigen::VectorXd::Zero(e.rows());
  Eigen::VectorXd d2 = Eigen::VectorXd::Zero(e.cols());
  for (Eigen::Index i = 0; i < e.outerSize(); ++i) {
    for (SparseRowMajor::InnerIterator it(e, i); it; ++it) {
      d1[it.row()] += it.value();
      d2[it.col()] += it.value();
    }
  }
  if ((d1.array() <= 0.0).any() || (d2.array() <= 0.0).any()) {
    throw ZeroDegree("degree_normalize: a row or column has zero degree");
  }
  SparseRowMajor a = e;
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    for (SparseRowMajor::InnerIterator it(a, i); it; ++it) {
      it.valueRef() /= std::sqrt(d1[it.row()] * d2[it.col()]);
    }
  }
  return a;
}

inline SparseRowMajor degree_normalize(const ExplanationMatrix& m) { return degree_normalize(to_eigen(m)); }

struct SvdOptions {
  std::size_t power_iterations = 4;
  std::size_t max_power_iterations = 60;  // cap when the residual check fails
  std::size_t oversampling = 10;
  double tolerance = 1e-6;  // on the residual, relative to the top singular value
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

// Flips each singular pair so the largest-magnitude entry of u is positive.
inline void fix_signs(SvdResult& r) {
  for (Eigen::Index k = 0; k < r.u.cols(); ++k) {
    Eigen::Index at = 0;
    r.u.col(k).cwiseAbs().maxCoeff(&at);
    if (r.u(at, k) < 0.0) {
      r.u.col(k) *= -1.0;
      r.v.col(k) *= -1.0;
    }
  }
}

}  // namespace detail

/// Top-l singular triplets by randomized subspace iteration. Extra power
/// iterations run until the residual meets the tolerance or the cap is hit.
inline SvdResult truncated_svd(const SparseRowMajor& a, std::size_t l, const SvdOptions& opt = {}) {
  const auto m = static_cast<std::size_t>(a.rows());
  const auto n = static_cast<std::size_t>(a.cols());
  if (l < 1 || l > std::min(m, n)) throw ConfigError("truncated_svd: rank must lie in [1, min(m, n)]");
  const auto width = static_cast<Eigen::Index>(std::min(l + opt.oversampling, std::min(m, n)));
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd omega(a.cols(), width);
  for (Eigen::Index j = 0; j < omega.cols(); ++j)
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = gauss(rng);
  const SparseRowMajor at = a.transpose();

  Eigen::MatrixXd q = detail::orthonormal_basis(a * omega);
  auto solve = [&]() {
    const Eigen::MatrixXd b = q.transpose() * a;  // width x n
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult r;
    const auto k = static_cast<Eigen::Index>(l);
    r.u = q * svd.matrixU().leftCols(k);
    r.s = svd.singularValues().head(k);
    r.v = svd.matrixV().leftCols(k);
    detail::fix_signs(r);
    r.residual = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::VectorXd av = a * r.v.col(i);
      r.residual = std::max(r.residual, (av - r.s[i] * r.u.col(i)).norm());
    }
    return r;
  };
  auto power = [&]() {
    q = detail::orthonormal_basis(at * q);
    q = detail::orthonormal_basis(a * q);
  };
  for (std::size_t it = 0; it < opt.power_iterations; ++it) power();
  auto r = solve();
  for (std::size_t it = opt.power_iterations; it < opt.max_power_iterations; ++it) {
    const double scale = std::max(r.s.size() > 0 ? r.s[0] : 0.0, 1e-300);
    if (r.residual <= opt.tolerance * scale) return r;
    power();
    r = solve();
  }
  const double scale = std::max(r.s.size() > 0 ? r.s[0] : 0.0, 1e-300);
  if (r.residual <= opt.tolerance * scale) return r;
  throw ConvergenceError(r.residual, std::move(r));
}

struct KMeansResult {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;  // k x dim
  std::size_t iterations = 0;
};

/// Lloyd's k-means with k-means++ seeding. Points are the rows of `x`. A
/// cluster that empties is re-seeded with the point farthest from its
/// current centroid.
inline KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 50) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1 || k > n) throw ConfigError("k-means: k must lie in [1, number of points]");
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids.resize(static_cast<Eigen::Index>(k), x.cols());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  r.centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      dist[i] = std::min(dist[i], (x.row(ii) - r.centroids.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= dist[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    r.centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
  }

  r.labels.assign(n, 0);
  auto assign = [&]() {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (x.row(ii) - r.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.labels[i] != best) changed = true;
      r.labels[i] = best;
    }
    return changed;
  };
  assign();
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum.row(static_cast<Eigen::Index>(r.labels[i])) += x.row(static_cast<Eigen::Index>(i));
      ++count[r.labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      if (count[c] > 0) {
        r.centroids.row(cc) = sum.row(cc) / static_cast<double>(count[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (x.row(static_cast<Eigen::Index>(i)) - r.centroids.row(cc)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids.row(cc) = x.row(static_cast<Eigen::Index>(far));
    }
    if (!assign()) break;
  }
  return r;
}

struct SpectralConfig {
  std::optional<std::size_t> k_rows;  // default ceil(sqrt(m)), at most 200
  std::optional<std::size_t> k_cols;
  std::optional<std::size_t> n_singular_vectors;  // embedding dimensions, default ceil(log2 max k)
  std::size_t power_iterations = 4;
  std::uint64_t seed = 0;
};

inline std::size_t default_k(std::size_t n) {
  return std::min<std::size_t>(200, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)))));
}

/// Initial clustering: k-means on spectral embeddings of the lines with
/// nonzero degree, then one singleton per zero-degree line. Cluster ids are
/// canonical (ordered by smallest member).
inline Clustering precluster(const ExplanationMatrix& m, const SpectralConfig& config = {}) {
  const auto row_mass = m.row_sums();
  const auto col_mass = m.col_sums();
  std::vector<Index> live_rows, live_cols;
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (row_mass[i] > 0.0) live_rows.push_back(Index(i));
  for (std::size_t j = 0; j < m.cols(); ++j)
    if (col_mass[j] > 0.0) live_cols.push_back(Index(j));
  const std::size_t kr = config.k_rows.value_or(std::min(default_k(m.rows()), live_rows.size()));
  const std::size_t kc = config.k_cols.value_or(std::min(default_k(m.cols()), live_cols.size()));
  if (kr < 1 || kr > live_rows.size()) throw ConfigError("precluster: k_rows must lie in [1, nonzero rows]");
  if (kc < 1 || kc > live_cols.size()) throw ConfigError("precluster: k_cols must lie in [1, nonzero columns]");

  // Compact the nonzero lines.
  std::vector<Index> row_pos(m.rows()), col_pos(m.cols());
  for (std::size_t k = 0; k < live_rows.size(); ++k) row_pos[live_rows[k]] = Index(k);
  for (std::size_t k = 0; k < live_cols.size(); ++k) col_pos[live_cols[k]] = Index(k);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(m.nnz());
  for (const auto& e : m.entries()) t.emplace_back(row_pos[e.row], col_pos[e.col], e.value);
  SparseRowMajor e(static_cast<Eigen::Index>(live_rows.size()), static_cast<Eigen::Index>(live_cols.size()));
  e.setFromTriplets(t.begin(), t.end());
  const SparseRowMajor a = degree_normalize(e);

  // ceil(log2 k) + 1 singular vectors in all; the first (trivial) one is
  // dropped, leaving l embedding dimensions.
  const std::size_t min_side = std::min(live_rows.size(), live_cols.size());
  std::size_t l = config.n_singular_vectors.value_or(
      static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max(kr, kc))))));
  l = std::min(l, min_side - 1);

  Eigen::MatrixXd zr = Eigen::MatrixXd::Zero(a.rows(), 1);
  Eigen::MatrixXd zc = Eigen::MatrixXd::Zero(a.cols(), 1);
  if (l >= 1) {
    SvdOptions so;
    so.power_iterations = config.power_iterations;
    so.seed = config.seed;
    SvdResult svd;
    try {
      svd = truncated_svd(a, l + 1, so);
    } catch (const ConvergenceError& err) {
      spdlog::warn("precluster: {}; using the partial subspace", err.what());
      svd = err.partial();
    }
    zr = svd.u.rightCols(static_cast<Eigen::Index>(l));
    zc = svd.v.rightCols(static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < zr.rows(); ++i) zr.row(i) /= std::sqrt(row_mass[live_rows[i]]);
    for (Eigen::Index j = 0; j < zc.rows(); ++j) zc.row(j) /= std::sqrt(col_mass[live_cols[j]]);
  }
  const auto rk = kmeans(zr, kr, config.seed);
  const auto ck = kmeans(zc, kc, config.seed ^ 0x632be59bd9b4e019ULL);

  std::vector<std::size_t> rl(m.rows()), cl(m.cols());
  std::size_t next = kr;
  for (std::size_t i = 0; i < m.rows(); ++i) rl[i] = row_mass[i] > 0.0 ? rk.labels[row_pos[i]] : next++;
  next = kc;
  for (std::size_t j = 0; j < m.cols(); ++j) cl[j] = col_mass[j] > 0.0 ? ck.labels[col_pos[j]] : next++;
  auto c = Clustering::from_labels(rl, cl).canonical();
  spdlog::debug("precluster: {} row / {} column clusters from {} singular vectors", c.row_clusters.size(),
                c.col_clusters.size(), l);
  return c;
}

}  // namespace melody
