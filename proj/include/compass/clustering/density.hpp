#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "compass/clustering/agglomerative.hpp"
#include "compass/clustering/common.hpp"
#include "compass/clustering/quality.hpp"

namespace compass::clustering {

struct DensityGrid {
  std::vector<std::size_t> min_cluster_sizes{5, 10, 15, 20};
  std::vector<std::size_t> min_samples{1, 5, 10};
};

// Distances below this are treated as this value when forming lambda = 1/d.
inline constexpr double kMinLambdaDistance = 1e-12;

inline double to_lambda(double distance) { return 1.0 / std::max(distance, kMinLambdaDistance); }

// Distance to the k-th nearest other point (k >= 1).
inline std::vector<double> core_distances(const DistanceMatrix& d, std::size_t k) {
  const std::size_t n = d.size();
  require(k >= 1 && k < n, Errc::invalid_argument, "min_samples must be in [1, n-1]");
  std::vector<double> core(n);
  compass::detail::parallel_for(n, [&](std::size_t i) {
    std::vector<double> row(d.row(i), d.row(i) + n);
    row.erase(row.begin() + static_cast<std::ptrdiff_t>(i));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  });
  return core;
}

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

// Prim's algorithm on the dense mutual-reachability graph.
inline std::vector<MstEdge> mutual_reachability_mst(const DistanceMatrix& d, const std::vector<double>& core) {
  const std::size_t n = d.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<bool> in_tree(n, false);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    const double* row = d.row(current);
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = std::max({core[current], core[v], row[v]});
      if (w < best[v]) {
        best[v] = w;
        from[v] = current;
      }
      if (next == n || best[v] < best[next]) next = v;
    }
    in_tree[next] = true;
    edges.push_back({from[next], next, best[next]});
    current = next;
  }
  return edges;
}

namespace detail {

struct LinkageNode {
  std::size_t left = 0;
  std::size_t right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

// Single-linkage hierarchy from MST edges. Nodes 0..n-1 are points, node
// n+i is the i-th merge.
inline std::vector<LinkageNode> single_linkage(std::vector<MstEdge> edges, std::size_t n) {
  std::stable_sort(edges.begin(), edges.end(), [](const MstEdge& l, const MstEdge& r) { return l.weight < r.weight; });
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::size_t> size(2 * n - 1, 1);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::vector<LinkageNode> nodes;
  nodes.reserve(n - 1);
  for (const auto& e : edges) {
    const std::size_t ra = find(e.a);
    const std::size_t rb = find(e.b);
    const std::size_t id = n + nodes.size();
    nodes.push_back({std::min(ra, rb), std::max(ra, rb), e.weight, size[ra] + size[rb]});
    parent[ra] = id;
    parent[rb] = id;
    size[id] = size[ra] + size[rb];
  }
  return nodes;
}

}  // namespace detail

// Condenses the single-linkage hierarchy at min_cluster_size, computes
// cluster stabilities and selects clusters by excess of mass. The root is
// never selected.
inline CondensedTree condense_tree(const std::vector<MstEdge>& mst, std::size_t n, std::size_t min_cluster_size) {
  require(min_cluster_size >= 2, Errc::invalid_argument, "min_cluster_size must be at least 2");
  CondensedTree tree;
  tree.point_parent.assign(n, 0);
  tree.point_lambda.assign(n, 0.0);
  tree.nodes.push_back({-1, 0.0, n, 0.0, false, -1});
  if (n < 2) return tree;

  const auto linkage = detail::single_linkage(mst, n);
  auto node_size = [&](std::size_t v) { return v < n ? std::size_t{1} : linkage[v - n].size; };
  std::vector<int> cluster_of(2 * n - 1, -1);
  cluster_of[2 * n - 2] = 0;

  auto drop_subtree = [&](std::size_t v, int cluster, double lambda) {
    std::vector<std::size_t> stack{v};
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      if (u < n) {
        tree.point_parent[u] = cluster;
        tree.point_lambda[u] = lambda;
      } else {
        stack.push_back(linkage[u - n].left);
        stack.push_back(linkage[u - n].right);
      }
    }
  };

  for (std::size_t id = 2 * n - 2; id >= n; --id) {
    const int cluster = cluster_of[id];
    if (cluster < 0) continue;
    const auto& node = linkage[id - n];
    const double lambda = to_lambda(node.distance);
    const std::size_t ls = node_size(node.left);
    const std::size_t rs = node_size(node.right);
    const bool left_big = ls >= min_cluster_size;
    const bool right_big = rs >= min_cluster_size;
    if (left_big && right_big) {
      for (std::size_t child : {node.left, node.right}) {
        const int label = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({cluster, lambda, node_size(child), 0.0, false, -1});
        if (child < n) {
          tree.point_parent[child] = label;
          tree.point_lambda[child] = lambda;
        } else {
          cluster_of[child] = label;
        }
      }
    } else {
      for (std::size_t child : {node.left, node.right}) {
        const bool big = child == node.left ? left_big : right_big;
        if (big && child >= n) {
          cluster_of[child] = cluster;
        } else if (big) {
          tree.point_parent[child] = cluster;
          tree.point_lambda[child] = lambda;
        } else {
          drop_subtree(child, cluster, lambda);
        }
      }
    }
  }

  auto& nodes = tree.nodes;
  for (std::size_t p = 0; p < n; ++p) {
    auto& c = nodes[static_cast<std::size_t>(tree.point_parent[p])];
    c.stability += tree.point_lambda[p] - c.birth_lambda;
  }
  for (std::size_t c = 1; c < nodes.size(); ++c) {
    auto& parent = nodes[static_cast<std::size_t>(nodes[c].parent)];
    parent.stability += (nodes[c].birth_lambda - parent.birth_lambda) * static_cast<double>(nodes[c].size);
  }

  std::vector<std::vector<std::size_t>> children(nodes.size());
  for (std::size_t c = 1; c < nodes.size(); ++c) children[static_cast<std::size_t>(nodes[c].parent)].push_back(c);
  std::vector<double> propagated(nodes.size(), 0.0);
  for (std::size_t c = nodes.size() - 1; c >= 1; --c) {
    double subtree = 0.0;
    for (std::size_t ch : children[c]) subtree += propagated[ch];
    if (children[c].empty() || nodes[c].stability >= subtree) {
      nodes[c].selected = true;
      propagated[c] = nodes[c].stability;
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        nodes[u].selected = false;
        stack.insert(stack.end(), children[u].begin(), children[u].end());
      }
    } else {
      propagated[c] = subtree;
    }
  }

  int next_label = 0;
  for (std::size_t c = 1; c < nodes.size(); ++c)
    if (nodes[c].selected) nodes[c].label = next_label++;
  for (std::size_t c = 1; c < nodes.size(); ++c)
    if (!nodes[c].selected && nodes[c].label < 0) nodes[c].label = nodes[static_cast<std::size_t>(nodes[c].parent)].label;
  return tree;
}

inline std::vector<int> tree_labels(const CondensedTree& tree) {
  std::vector<int> labels(tree.point_parent.size());
  for (std::size_t p = 0; p < labels.size(); ++p)
    labels[p] = tree.nodes[static_cast<std::size_t>(tree.point_parent[p])].label;
  return labels;
}

struct DensityFit {
  CondensedTree tree;
  std::vector<double> core;
  std::vector<int> labels;
  std::size_t n_clusters = 0;
};

inline DensityFit hdbscan(const DistanceMatrix& d, std::size_t min_cluster_size, std::size_t min_samples) {
  DensityFit fit;
  fit.core = core_distances(d, min_samples);
  fit.tree = condense_tree(mutual_reachability_mst(d, fit.core), d.size(), min_cluster_size);
  fit.labels = tree_labels(fit.tree);
  fit.n_clusters = count_clusters(fit.labels);
  return fit;
}

// Grid search over (min_cluster_size, min_samples); the DBCV-maximal cell
// wins, earlier grid cells winning ties.
inline FitResult fit_density(const EmbeddingMatrix& x, const DensityGrid& grid = {}) {
  require(!grid.min_cluster_sizes.empty() && !grid.min_samples.empty(), Errc::invalid_argument, "empty grid");
  const std::size_t max_mcs = *std::max_element(grid.min_cluster_sizes.begin(), grid.min_cluster_sizes.end());
  const std::size_t max_ms = *std::max_element(grid.min_samples.begin(), grid.min_samples.end());
  require(x.count() >= 2 * max_mcs, Errc::invalid_argument,
          "density clustering needs at least 2*max(min_cluster_size) points");
  require(max_ms < x.count(), Errc::invalid_argument, "min_samples must be below the point count");

  const DistanceMatrix d(x);
  double spread = 0.0;
  for (std::size_t j = 1; j < d.size(); ++j) spread = std::max(spread, d(0, j));
  require(spread > 0.0, Errc::degenerate_input, "all points identical: mutual reachability is zero everywhere");

  struct Cell {
    std::size_t mcs, ms;
  };
  std::vector<Cell> cells;
  for (std::size_t mcs : grid.min_cluster_sizes)
    for (std::size_t ms : grid.min_samples) cells.push_back({mcs, ms});

  std::vector<DensityFit> fits(cells.size());
  std::vector<QualityReport> reports(cells.size());
  compass::detail::parallel_for(cells.size(), [&](std::size_t i) {
    fits[i] = hdbscan(d, cells[i].mcs, cells[i].ms);
    auto& r = reports[i];
    r.method = ClusterMethod::density;
    r.params = {{"min_cluster_size", static_cast<double>(cells[i].mcs)},
                {"min_samples", static_cast<double>(cells[i].ms)}};
    r.n_clusters = fits[i].n_clusters;
    r.noise_fraction = noise_fraction(fits[i].labels);
    if (fits[i].n_clusters >= 1) r.dbcv = dbcv_score(d, x.dim(), fits[i].labels);
  });

  std::ptrdiff_t winner = -1;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!reports[i].dbcv) continue;
    if (winner < 0 || *reports[i].dbcv > *reports[static_cast<std::size_t>(winner)].dbcv)
      winner = static_cast<std::ptrdiff_t>(i);
  }
  require(winner >= 0, Errc::degenerate_input, "no grid cell produced a cluster");
  auto& fit = fits[static_cast<std::size_t>(winner)];
  const auto& cell = cells[static_cast<std::size_t>(winner)];

  FitResult out;
  out.model.method = ClusterMethod::density;
  out.model.k = fit.n_clusters;
  out.model.dim = x.dim();
  out.model.centroids = unit_centroids(x, fit.labels, fit.n_clusters);
  out.model.params = {{"min_cluster_size", static_cast<double>(cell.mcs)},
                      {"min_samples", static_cast<double>(cell.ms)}};
  out.model.hierarchy = DensityHierarchy{cell.mcs, cell.ms, x, fit.core, std::move(fit.tree)};
  out.assignment = {fit.labels, ClusterMethod::density, fit.n_clusters};
  out.reports = std::move(reports);
  return out;
}

}  // namespace compass::clustering
