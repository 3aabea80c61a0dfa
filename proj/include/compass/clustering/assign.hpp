#pragma once

#include <limits>
#include <vector>

#include "compass/clustering/density.hpp"

namespace compass::clustering {

inline int nearest_centroid(std::span<const float> point, const ClusterModel& model) {
  double best = std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t c = 0; c < model.k; ++c) {
    const double dist = cosine_distance(point, model.centroid(c));
    if (dist < best) {
      best = dist;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

// Places a new point in the fixed condensed tree: its core distance is taken
// against the stored points, it attaches to its mutual-reachability nearest
// neighbor, and walks up from that neighbor's cluster to the cluster alive
// at the attachment lambda. Points that attach above every selected cluster
// are noise.
inline int place_in_tree(std::span<const float> point, const DensityHierarchy& h) {
  const std::size_t n = h.points.count();
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) dist[j] = euclidean(point, h.points.row(j));
  std::vector<double> sorted = dist;
  const std::size_t k = std::min(h.min_samples, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  const double core = sorted[k - 1];

  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const double mr = std::max({core, h.core_distances[j], dist[j]});
    if (mr < best) {
      best = mr;
      nearest = j;
    }
  }
  const double lambda = std::min(to_lambda(best), h.tree.point_lambda[nearest]);
  auto c = static_cast<std::size_t>(h.tree.point_parent[nearest]);
  while (c != 0 && h.tree.nodes[c].birth_lambda > lambda) c = static_cast<std::size_t>(h.tree.nodes[c].parent);
  return h.tree.nodes[c].label;
}

inline Assignment assign_density(const EmbeddingMatrix& x_new, const ClusterModel& model) {
  require(model.hierarchy.has_value(), Errc::missing_hierarchy, "density model has no retained hierarchy");
  require(x_new.empty() || x_new.dim() == model.dim, Errc::dimension_mismatch,
          "points have dim " + std::to_string(x_new.dim()) + ", model has " + std::to_string(model.dim));
  Assignment out{std::vector<int>(x_new.count()), model.method, model.k};
  compass::detail::parallel_for(x_new.count(),
                                [&](std::size_t i) { out.labels[i] = place_in_tree(x_new.row(i), *model.hierarchy); });
  return out;
}

inline Assignment assign(const EmbeddingMatrix& x_new, const ClusterModel& model) {
  require(x_new.empty() || x_new.dim() == model.dim, Errc::dimension_mismatch,
          "points have dim " + std::to_string(x_new.dim()) + ", model has " + std::to_string(model.dim));
  if (model.method == ClusterMethod::density) return assign_density(x_new, model);
  Assignment out{std::vector<int>(x_new.count()), model.method, model.k};
  for (std::size_t i = 0; i < x_new.count(); ++i) out.labels[i] = nearest_centroid(x_new.row(i), model);
  return out;
}

}  // namespace compass::clustering
