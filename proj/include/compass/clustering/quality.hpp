#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "compass/clustering/common.hpp"

namespace compass::clustering {

enum class QualityMetric { silhouette, dbcv };

namespace detail {

inline std::vector<std::vector<std::size_t>> members_by_cluster(const std::vector<int>& labels) {
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[i]);
    if (members.size() <= c) members.resize(c + 1);
    members[c].push_back(i);
  }
  std::erase_if(members, [](const auto& m) { return m.empty(); });
  return members;
}

}  // namespace detail

// Cosine distances below this are float32 rounding, not structure.
inline constexpr double kSilhouetteZero = 1e-6;

// Mean silhouette under cosine distance, noise excluded. Uses per-cluster
// vector sums: the mean cosine distance from x to cluster C is
// 1 - x.sum(C)/|C|, so the cost is O(n K d) instead of O(n^2 d).
// Returns nullopt when every point has a = b = 0 (e.g. identical points).
inline std::optional<double> silhouette_score(const EmbeddingMatrix& x, const std::vector<int>& labels) {
  require(labels.size() == x.count(), Errc::invalid_argument, "labels do not match rows");
  const auto members = detail::members_by_cluster(labels);
  require(!members.empty(), Errc::degenerate_input, "silhouette needs non-noise points");
  require(members.size() >= 2, Errc::degenerate_input, "silhouette needs at least two clusters");

  const std::size_t dim = x.dim();
  const std::size_t k = members.size();
  std::vector<double> sums(k * dim, 0.0);
  std::vector<int> cluster_of(x.count(), -1);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i : members[c]) {
      cluster_of[i] = static_cast<int>(c);
      auto row = x.row(i);
      for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += row[t];
    }
  }

  double total = 0.0;
  std::size_t points = 0;
  bool any_defined = false;
  for (std::size_t i = 0; i < x.count(); ++i) {
    if (cluster_of[i] < 0) continue;
    ++points;
    const auto own = static_cast<std::size_t>(cluster_of[i]);
    const std::size_t n_own = members[own].size();
    auto row = x.row(i);
    auto dot_sum = [&](std::size_t c) {
      double s = 0.0;
      for (std::size_t t = 0; t < dim; ++t) s += static_cast<double>(row[t]) * sums[c * dim + t];
      return s;
    };
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own) continue;
      const auto n_c = static_cast<double>(members[c].size());
      b = std::min(b, (n_c - dot_sum(c)) / n_c);
    }
    if (n_own == 1) {  // singleton convention: s = 0
      any_defined = any_defined || b > kSilhouetteZero;
      continue;
    }
    const double self = dot(row, row);
    const double a = (static_cast<double>(n_own - 1) - (dot_sum(own) - self)) / static_cast<double>(n_own - 1);
    const double denom = std::max(a, b);
    if (denom > kSilhouetteZero) {
      any_defined = true;
      total += (b - a) / denom;
    }
  }
  if (!any_defined) return std::nullopt;
  return total / static_cast<double>(points);
}

namespace detail {

// All-points core distance of each member with respect to its own cluster:
// (sum_{j != i} (1/d_ij)^dim / (n-1))^(-1/dim), evaluated in log space.
inline std::vector<double> all_points_core_distances(const DistanceMatrix& d, const std::vector<std::size_t>& cluster,
                                                     double dim) {
  const std::size_t n = cluster.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<double> logs;
  for (std::size_t a = 0; a < n; ++a) {
    logs.clear();
    bool has_zero = false;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double dist = d(cluster[a], cluster[b]);
      if (dist <= 0.0) {
        has_zero = true;
        break;
      }
      logs.push_back(-dim * std::log(dist));
    }
    if (has_zero) continue;  // infinite density
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0.0;
    for (double l : logs) s += std::exp(l - mx);
    const double log_mean = mx + std::log(s) - std::log(static_cast<double>(n - 1));
    out[a] = std::exp(-log_mean / dim);
  }
  return out;
}

struct ClusterSparseness {
  std::vector<std::size_t> internal;  // indices into the cluster's member list
  double sparseness = 0.0;
};

// Kruskal MST over mutual reachability within a cluster. Equal weights are
// common (core distances dominate), so edges are ordered by (weight, a, b)
// over member positions, which makes the tree and its internal nodes unique.
// Internal nodes are those of degree > 1; without any, every member/edge is used.
inline ClusterSparseness density_sparseness(const DistanceMatrix& d, const std::vector<std::size_t>& cluster,
                                            const std::vector<double>& core) {
  const std::size_t n = cluster.size();
  ClusterSparseness out;
  if (n == 1) {
    out.internal = {0};
    return out;
  }
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  all.reserve(n * (n - 1) / 2);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      all.emplace_back(std::max({core[a], core[b], d(cluster[a], cluster[b])}), a, b);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> parent(n);
  for (std::size_t v = 0; v < n; ++v) parent[v] = v;
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<std::size_t> degree(n, 0);
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  for (const auto& [w, a, b] : all) {
    const auto ra = find(a), rb = find(b);
    if (ra == rb) continue;
    parent[ra] = rb;
    edges.emplace_back(a, b, w);
    ++degree[a];
    ++degree[b];
    if (edges.size() + 1 == n) break;
  }
  for (std::size_t v = 0; v < n; ++v)
    if (degree[v] > 1) out.internal.push_back(v);
  bool any_internal_edge = false;
  double mx = 0.0;
  for (auto [a, b, w] : edges) {
    if (degree[a] > 1 && degree[b] > 1) {
      any_internal_edge = true;
      mx = std::max(mx, w);
    }
  }
  if (!any_internal_edge)
    for (auto [a, b, w] : edges) mx = std::max(mx, w);
  out.sparseness = mx;
  if (out.internal.empty()) {
    out.internal.resize(n);
    for (std::size_t v = 0; v < n; ++v) out.internal[v] = v;
  }
  return out;
}

}  // namespace detail

// Density-Based Clustering Validation over Euclidean mutual reachability.
// Noise points count in the denominator of the size weighting, which is how
// they penalize the score. A single cluster has no separation and scores 0.
inline double dbcv_score(const DistanceMatrix& d, std::size_t dim, const std::vector<int>& labels) {
  require(labels.size() == d.size(), Errc::invalid_argument, "labels do not match rows");
  const auto members = detail::members_by_cluster(labels);
  require(!members.empty(), Errc::degenerate_input, "dbcv needs non-noise points");
  const std::size_t k = members.size();
  if (k == 1) return 0.0;

  std::vector<std::vector<double>> core(k);
  std::vector<detail::ClusterSparseness> sparse(k);
  for (std::size_t c = 0; c < k; ++c) {
    core[c] = detail::all_points_core_distances(d, members[c], static_cast<double>(dim));
    sparse[c] = detail::density_sparseness(d, members[c], core[c]);
  }
  std::vector<double> separation(k, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double mn = std::numeric_limits<double>::infinity();
      for (std::size_t ia : sparse[a].internal) {
        for (std::size_t ib : sparse[b].internal) {
          const double w = std::max({core[a][ia], core[b][ib], d(members[a][ia], members[b][ib])});
          mn = std::min(mn, w);
        }
      }
      separation[a] = std::min(separation[a], mn);
      separation[b] = std::min(separation[b], mn);
    }
  }
  double score = 0.0;
  const auto total = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < k; ++c) {
    const double denom = std::max(separation[c], sparse[c].sparseness);
    const double validity = denom > 0.0 ? (separation[c] - sparse[c].sparseness) / denom : 0.0;
    score += static_cast<double>(members[c].size()) / total * validity;
  }
  return score;
}

inline double dbcv_score(const EmbeddingMatrix& x, const std::vector<int>& labels) {
  return dbcv_score(DistanceMatrix(x), x.dim(), labels);
}

inline double cluster_quality(const EmbeddingMatrix& x, const std::vector<int>& labels, QualityMetric metric) {
  if (metric == QualityMetric::dbcv) return dbcv_score(x, labels);
  auto s = silhouette_score(x, labels);
  require(s.has_value(), Errc::degenerate_input, "silhouette undefined: all intra/inter distances are zero");
  return *s;
}

}  // namespace compass::clustering
