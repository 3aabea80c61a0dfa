#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "compass/clustering/common.hpp"
#include "compass/clustering/quality.hpp"

namespace compass::clustering {

struct ButinaOptions {
  double t_min = 0.70;
  double t_max = 0.95;
  double coverage = 0.95;
  std::size_t max_iterations = 20;
  double tolerance = 1e-3;
};

struct ButinaPartition {
  std::vector<int> labels;          // -1 for singletons
  std::vector<std::size_t> centers;  // one per non-singleton cluster, in label order
  double threshold = 0.0;
  double assigned_fraction = 0.0;  // fraction of points in non-singleton clusters
  std::size_t n_clusters = 0;
};

// Cosine-distance neighbor lists, each sorted by distance, truncated at t_max.
class NeighborLists {
 public:
  NeighborLists(const EmbeddingMatrix& x, double t_max) : lists_(x.count()) {
    const std::size_t n = x.count();
    compass::detail::parallel_for(n, [&](std::size_t i) {
      auto& list = lists_[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dist = cosine_distance(x.row(i), x.row(j));
        if (dist <= t_max) list.emplace_back(dist, j);
      }
      std::sort(list.begin(), list.end());
    });
  }

  [[nodiscard]] std::size_t size() const noexcept { return lists_.size(); }

  // Number of neighbors within threshold (a prefix of the sorted list).
  [[nodiscard]] std::size_t count_within(std::size_t i, double threshold) const {
    const auto& list = lists_[i];
    return static_cast<std::size_t>(
        std::upper_bound(list.begin(), list.end(), std::pair{threshold, SIZE_MAX}) - list.begin());
  }
  [[nodiscard]] const std::vector<std::pair<double, std::size_t>>& of(std::size_t i) const { return lists_[i]; }

 private:
  std::vector<std::vector<std::pair<double, std::size_t>>> lists_;
};

// Classic sphere exclusion: points ordered by neighbor count (descending,
// index breaks ties); each unclaimed point becomes a center and claims its
// unclaimed neighbors.
inline ButinaPartition butina_partition(const NeighborLists& neighbors, double threshold) {
  const std::size_t n = neighbors.size();
  std::vector<std::size_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) counts[i] = neighbors.count_within(i, threshold);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

  ButinaPartition out;
  out.threshold = threshold;
  out.labels.assign(n, -1);
  std::vector<bool> claimed(n, false);
  std::vector<std::size_t> members;
  std::size_t assigned = 0;
  for (std::size_t center : order) {
    if (claimed[center]) continue;
    claimed[center] = true;
    members.clear();
    const auto& list = neighbors.of(center);
    for (std::size_t t = 0; t < counts[center]; ++t) {
      const std::size_t j = list[t].second;
      if (!claimed[j]) {
        claimed[j] = true;
        members.push_back(j);
      }
    }
    if (members.empty()) continue;  // singleton
    const int label = static_cast<int>(out.centers.size());
    out.centers.push_back(center);
    out.labels[center] = label;
    for (std::size_t j : members) out.labels[j] = label;
    assigned += members.size() + 1;
  }
  out.n_clusters = out.centers.size();
  out.assigned_fraction = n > 0 ? static_cast<double>(assigned) / static_cast<double>(n) : 0.0;
  return out;
}

// Binary search over the distance threshold for the smallest threshold that
// reaches the coverage target; among all evaluated thresholds meeting the
// target, the one with the most non-singleton clusters is returned.
inline FitResult fit_taylor_butina(const EmbeddingMatrix& x, const ButinaOptions& opt = {}) {
  require(0.0 < opt.t_min && opt.t_min < opt.t_max && opt.t_max < 1.0, Errc::invalid_argument,
          "thresholds must satisfy 0 < t_min < t_max < 1");
  require(x.count() > 0, Errc::invalid_argument, "no points");
  const NeighborLists neighbors(x, opt.t_max);

  std::vector<ButinaPartition> evaluated;
  auto evaluate = [&](double t) -> const ButinaPartition& {
    evaluated.push_back(butina_partition(neighbors, t));
    return evaluated.back();
  };

  double best_fraction = evaluate(opt.t_max).assigned_fraction;
  if (best_fraction >= opt.coverage) {
    if (evaluate(opt.t_min).assigned_fraction < opt.coverage) {
      double lo = opt.t_min;
      double hi = opt.t_max;
      for (std::size_t it = 0; it < opt.max_iterations && hi - lo > opt.tolerance; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (evaluate(mid).assigned_fraction >= opt.coverage)
          hi = mid;
        else
          lo = mid;
      }
    }
  }
  const ButinaPartition* chosen = nullptr;
  for (const auto& p : evaluated) {
    best_fraction = std::max(best_fraction, p.assigned_fraction);
    if (p.assigned_fraction < opt.coverage) continue;
    if (!chosen || p.n_clusters > chosen->n_clusters ||
        (p.n_clusters == chosen->n_clusters && p.threshold < chosen->threshold))
      chosen = &p;
  }
  if (!chosen || chosen->n_clusters == 0) {
    throw CoverageError(best_fraction, "coverage " + std::to_string(opt.coverage) +
                                           " unachievable in threshold range; best fraction " +
                                           std::to_string(best_fraction));
  }

  FitResult out;
  for (const auto& p : evaluated) {
    QualityReport r;
    r.method = ClusterMethod::butina;
    r.params = {{"threshold", p.threshold}, {"assigned_fraction", p.assigned_fraction}};
    r.n_clusters = p.n_clusters;
    r.noise_fraction = 1.0 - p.assigned_fraction;
    if (p.n_clusters >= 2) r.silhouette = silhouette_score(x, p.labels);
    out.reports.push_back(std::move(r));
  }
  out.model.method = ClusterMethod::butina;
  out.model.k = chosen->n_clusters;
  out.model.dim = x.dim();
  out.model.centroids = unit_centroids(x, chosen->labels, chosen->n_clusters);
  out.model.params = {{"threshold", chosen->threshold},
                      {"assigned_fraction", chosen->assigned_fraction},
                      {"coverage", opt.coverage}};
  out.assignment = {chosen->labels, ClusterMethod::butina, chosen->n_clusters};
  return out;
}

}  // namespace compass::clustering
