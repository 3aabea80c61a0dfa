#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "compass/clustering/common.hpp"
#include "compass/clustering/quality.hpp"

namespace compass::clustering {

struct Merge {
  std::size_t a = 0;  // representative point of each side
  std::size_t b = 0;
  double height = 0.0;  // Ward distance (Euclidean scale)
};

// Ward linkage by the nearest-neighbor chain algorithm with Lance-Williams
// updates on squared Euclidean distances. Merges are returned sorted by
// height; since Ward is reducible this is a valid dendrogram.
inline std::vector<Merge> ward_linkage(const EmbeddingMatrix& x) {
  const std::size_t n = x.count();
  std::vector<Merge> merges;
  if (n < 2) return merges;
  auto idx = [n](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return n * i - i * (i + 1) / 2 + (j - i - 1);
  };
  std::vector<double> d2(n * (n - 1) / 2);
  compass::detail::parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double e = euclidean(x.row(i), x.row(j));
      d2[idx(i, j)] = e * e;
    }
  });
  std::vector<double> size(n, 1.0);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> chain;
  chain.reserve(n);
  merges.reserve(n - 1);

  while (merges.size() < n - 1) {
    if (chain.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    for (;;) {
      const std::size_t a = chain.back();
      const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
      std::size_t b = prev;
      double best = prev < n ? d2[idx(a, prev)] : std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        if (!active[c] || c == a) continue;
        const double v = d2[idx(a, c)];
        if (v < best) {
          best = v;
          b = c;
        }
      }
      if (b == prev) {
        chain.pop_back();
        chain.pop_back();
        const std::size_t keep = std::min(a, b);
        const std::size_t drop = std::max(a, b);
        const double na = size[a];
        const double nb = size[b];
        for (std::size_t c = 0; c < n; ++c) {
          if (!active[c] || c == a || c == b) continue;
          const double nc = size[c];
          d2[idx(keep, c)] = ((na + nc) * d2[idx(a, c)] + (nb + nc) * d2[idx(b, c)] - nc * best) / (na + nb + nc);
        }
        active[drop] = false;
        size[keep] = na + nb;
        merges.push_back({a, b, std::sqrt(std::max(0.0, best))});
        break;
      }
      chain.push_back(b);
    }
  }
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& l, const Merge& r) { return l.height < r.height; });
  return merges;
}

namespace detail {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

inline std::vector<int> labels_from_forest(UnionFind& uf, std::size_t n) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(uf.find(i));
  canonicalize_labels(labels);
  return labels;
}

}  // namespace detail

// Flat labels for every K in ks from one pass over the sorted merges.
inline std::vector<std::vector<int>> cut_dendrogram(const std::vector<Merge>& merges, std::size_t n,
                                                    const std::vector<std::size_t>& ks) {
  std::vector<std::vector<int>> out(ks.size());
  detail::UnionFind uf(n);
  std::size_t clusters = n;
  std::size_t next_merge = 0;
  std::vector<std::size_t> order(ks.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return ks[l] > ks[r]; });
  for (std::size_t slot : order) {
    while (clusters > ks[slot] && next_merge < merges.size()) {
      uf.unite(merges[next_merge].a, merges[next_merge].b);
      ++next_merge;
      --clusters;
    }
    out[slot] = detail::labels_from_forest(uf, n);
  }
  return out;
}

inline FitResult fit_agglomerative(const EmbeddingMatrix& x, KRange range = {80, 120, 1}) {
  require(x.count() >= 2, Errc::invalid_argument, "agglomerative clustering needs at least two points");
  std::vector<std::size_t> ks;
  for (std::size_t k : range.values())
    if (k >= 1 && k <= x.count()) ks.push_back(k);
  require(!ks.empty(), Errc::invalid_argument, "no K in range fits " + std::to_string(x.count()) + " points");

  const auto merges = ward_linkage(x);
  const auto cuts = cut_dendrogram(merges, x.count(), ks);
  std::vector<QualityReport> reports(ks.size());
  compass::detail::parallel_for(ks.size(), [&](std::size_t slot) {
    auto& r = reports[slot];
    r.method = ClusterMethod::agglomerative;
    r.params = {{"k", static_cast<double>(ks[slot])}};
    r.n_clusters = ks[slot];
    if (ks[slot] >= 2) r.silhouette = silhouette_score(x, cuts[slot]);
  });
  std::size_t winner = 0;
  for (std::size_t slot = 1; slot < ks.size(); ++slot) {
    const auto& cand = reports[slot].silhouette;
    const auto& cur = reports[winner].silhouette;
    if (cand && (!cur || *cand > *cur || (*cand == *cur && ks[slot] < ks[winner]))) winner = slot;
    else if (!cand && !cur && ks[slot] < ks[winner]) winner = slot;
  }
  FitResult out;
  const std::size_t k = ks[winner];
  out.model.method = ClusterMethod::agglomerative;
  out.model.k = k;
  out.model.dim = x.dim();
  out.model.centroids = unit_centroids(x, cuts[winner], k);
  out.model.params = {{"k", static_cast<double>(k)}};
  out.assignment = {cuts[winner], ClusterMethod::agglomerative, k};
  out.reports = std::move(reports);
  return out;
}

}  // namespace compass::clustering
