#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "compass/clustering/common.hpp"
#include "compass/clustering/quality.hpp"
#include "compass/random.hpp"

namespace compass::clustering {

inline constexpr std::size_t kMaxLloydIterations = 300;

struct LloydRun {
  std::vector<double> centroids;  // k x dim, unit rows
  std::vector<int> labels;
  double inertia = 0.0;  // sum of cosine distances to assigned centroid
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // inertia after every assignment step
};

namespace detail {

inline double assign_nearest(const EmbeddingMatrix& x, const std::vector<double>& centroids, std::size_t k,
                             std::vector<int>& labels) {
  const std::size_t dim = x.dim();
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.count(); ++i) {
    auto row = x.row(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      const double* mu = centroids.data() + c * dim;
      for (std::size_t t = 0; t < dim; ++t) s += static_cast<double>(row[t]) * mu[t];
      const double dist = 1.0 - s;
      if (dist < best) {
        best = dist;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
    inertia += best;
  }
  return inertia;
}

inline std::vector<double> kmeans_plus_plus(const EmbeddingMatrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.count();
  const std::size_t dim = x.dim();
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  auto push_row = [&](std::size_t i) {
    auto row = x.row(i);
    centroids.insert(centroids.end(), row.begin(), row.end());
  };
  push_row(rng.index(n));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const double* mu = centroids.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = x.row(i);
      double s = 0.0;
      for (std::size_t t = 0; t < dim; ++t) s += static_cast<double>(row[t]) * mu[t];
      d2[i] = std::min(d2[i], std::max(0.0, 2.0 - 2.0 * s));
      total += d2[i];
    }
    push_row(total > 0.0 ? rng.categorical(d2) : rng.index(n));
  }
  return centroids;
}

}  // namespace detail

// Spherical Lloyd iterations from a k-means++ start. Centroids are
// renormalized after every mean, so inertia never increases.
inline LloydRun lloyd_kmeans(const EmbeddingMatrix& x, std::size_t k, Rng& rng,
                             std::size_t max_iterations = kMaxLloydIterations) {
  require(k >= 1 && k <= x.count(), Errc::invalid_argument, "k must be in [1, count]");
  const std::size_t n = x.count();
  const std::size_t dim = x.dim();
  LloydRun run;
  run.centroids = detail::kmeans_plus_plus(x, k, rng);
  run.labels.assign(n, 0);
  run.inertia = detail::assign_nearest(x, run.centroids, k, run.labels);
  run.inertia_trace.push_back(run.inertia);

  std::vector<int> next(n, 0);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> sizes(k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.labels[i]);
      ++sizes[c];
      auto row = x.row(i);
      for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += row[t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      double* mu = run.centroids.data() + c * dim;
      double s = 0.0;
      for (std::size_t t = 0; t < dim; ++t) s += sums[c * dim + t] * sums[c * dim + t];
      const double len = std::sqrt(s);
      if (sizes[c] > 0 && len > 1e-12) {
        for (std::size_t t = 0; t < dim; ++t) mu[t] = sums[c * dim + t] / len;
      }
    }
    // Empty clusters take over the point worst served by a cluster that can spare it.
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t worst = n;
      double worst_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(run.labels[i]);
        if (sizes[own] < 2) continue;
        double s = 0.0;
        const double* mu = run.centroids.data() + own * dim;
        auto row = x.row(i);
        for (std::size_t t = 0; t < dim; ++t) s += static_cast<double>(row[t]) * mu[t];
        if (1.0 - s > worst_dist) {
          worst_dist = 1.0 - s;
          worst = i;
        }
      }
      if (worst == n) continue;
      auto row = x.row(worst);
      std::copy(row.begin(), row.end(), run.centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
      --sizes[static_cast<std::size_t>(run.labels[worst])];
      ++sizes[c];
      run.labels[worst] = static_cast<int>(c);
    }
    run.inertia = detail::assign_nearest(x, run.centroids, k, next);
    run.inertia_trace.push_back(run.inertia);
    run.iterations = it + 1;
    const bool converged = next == run.labels;
    run.labels.swap(next);
    if (converged) break;
  }
  return run;
}

inline ClusterModel model_from_centroids(ClusterMethod method, std::size_t dim, const std::vector<double>& centroids) {
  ClusterModel model;
  model.method = method;
  model.dim = dim;
  model.k = centroids.size() / dim;
  model.centroids.resize(centroids.size());
  for (std::size_t c = 0; c < model.k; ++c) {
    std::span<const double> src(centroids.data() + c * dim, dim);
    std::span<float> dst(model.centroids.data() + c * dim, dim);
    normalize_into(src, dst);
  }
  return model;
}

// Sweeps K over the range; each K keeps the best-inertia run of
// seeds_per_k k-means++ starts, and the model with maximal silhouette wins
// (ties and undefined silhouettes resolve to the smaller K).
inline FitResult fit_kmeans(const EmbeddingMatrix& x, KRange range = {}, std::size_t seeds_per_k = 10,
                            std::uint64_t rng_seed = 0) {
  const auto all_ks = range.values();
  require(!all_ks.empty(), Errc::invalid_argument, "empty K range");
  require(seeds_per_k >= 1, Errc::invalid_argument, "seeds_per_k must be positive");
  std::vector<std::size_t> ks;
  for (std::size_t k : all_ks)
    if (k >= 1 && k < x.count()) ks.push_back(k);
  if (ks.empty() && x.count() > 0) {
    for (std::size_t k : all_ks)
      if (k == 1) ks.push_back(k);
  }
  require(!ks.empty(), Errc::invalid_argument,
          "every K in range is >= point count " + std::to_string(x.count()));

  std::vector<LloydRun> best(ks.size());
  std::vector<QualityReport> reports(ks.size());
  compass::detail::parallel_for(ks.size(), [&](std::size_t slot) {
    const std::size_t k = ks[slot];
    for (std::size_t s = 0; s < seeds_per_k; ++s) {
      Rng rng(derive_seed(rng_seed, k, s));
      auto run = lloyd_kmeans(x, k, rng);
      if (s == 0 || run.inertia < best[slot].inertia) best[slot] = std::move(run);
    }
    auto& r = reports[slot];
    r.method = ClusterMethod::kmeans;
    r.params = {{"k", static_cast<double>(k)}, {"inertia", best[slot].inertia}};
    r.n_clusters = k;
    r.noise_fraction = 0.0;
    if (k >= 2) r.silhouette = silhouette_score(x, best[slot].labels);
  });

  std::size_t winner = 0;
  for (std::size_t slot = 1; slot < ks.size(); ++slot) {
    const auto& cand = reports[slot].silhouette;
    const auto& cur = reports[winner].silhouette;
    if (cand && (!cur || *cand > *cur)) winner = slot;
  }
  FitResult out;
  out.model = model_from_centroids(ClusterMethod::kmeans, x.dim(), best[winner].centroids);
  out.model.params = {{"k", static_cast<double>(ks[winner])},
                      {"seeds_per_k", static_cast<double>(seeds_per_k)},
                      {"inertia", best[winner].inertia}};
  out.assignment = {best[winner].labels, ClusterMethod::kmeans, out.model.k};
  out.reports = std::move(reports);
  return out;
}

}  // namespace compass::clustering
