#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "compass/core.hpp"
#include "compass/detail/parallel.hpp"

namespace compass::clustering {

struct KRange {
  std::size_t min = 10;
  std::size_t max = 120;
  std::size_t step = 5;

  [[nodiscard]] std::vector<std::size_t> values() const {
    std::vector<std::size_t> out;
    if (step == 0 || min > max) return out;
    for (std::size_t k = min; k <= max; k += step) out.push_back(k);
    return out;
  }

  friend bool operator==(const KRange&, const KRange&) = default;
};

struct QualityReport {
  ClusterMethod method = ClusterMethod::kmeans;
  std::map<std::string, double> params;
  std::optional<double> silhouette;
  std::optional<double> dbcv;
  std::size_t n_clusters = 0;
  double noise_fraction = 0.0;

  friend bool operator==(const QualityReport&, const QualityReport&) = default;
};

struct FitResult {
  ClusterModel model;
  Assignment assignment;
  std::vector<QualityReport> reports;
};

// Dense symmetric n x n Euclidean distance matrix.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const EmbeddingMatrix& x) : n_(x.count()), d_(n_ * n_, 0.0) {
    detail::parallel_for(n_, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double v = euclidean(x.row(i), x.row(j));
        d_[i * n_ + j] = v;
        d_[j * n_ + i] = v;
      }
    });
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  [[nodiscard]] const double* row(std::size_t i) const { return d_.data() + i * n_; }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

// Unit-normalized mean of each cluster's rows. A cluster whose mean vanishes
// falls back to its lowest-index member.
inline std::vector<float> unit_centroids(const EmbeddingMatrix& x, const std::vector<int>& labels, std::size_t k) {
  const std::size_t dim = x.dim();
  std::vector<double> sums(k * dim, 0.0);
  std::vector<std::ptrdiff_t> first(k, -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[i]);
    if (first[c] < 0) first[c] = static_cast<std::ptrdiff_t>(i);
    auto row = x.row(i);
    for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += row[t];
  }
  std::vector<float> out(k * dim, 0.0f);
  for (std::size_t c = 0; c < k; ++c) {
    std::span<const double> mean(sums.data() + c * dim, dim);
    std::span<float> dst(out.data() + c * dim, dim);
    if (!normalize_into(mean, dst) && first[c] >= 0) {
      auto row = x.row(static_cast<std::size_t>(first[c]));
      std::copy(row.begin(), row.end(), dst.begin());
    }
  }
  return out;
}

// Renumbers labels 0..K-1 in order of first appearance; -1 stays -1.
inline std::size_t canonicalize_labels(std::vector<int>& labels) {
  std::map<int, int> remap;
  for (int& l : labels) {
    if (l < 0) continue;
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    l = it->second;
  }
  return remap.size();
}

inline double noise_fraction(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  const auto noise = std::count(labels.begin(), labels.end(), -1);
  return static_cast<double>(noise) / static_cast<double>(labels.size());
}

inline std::size_t count_clusters(const std::vector<int>& labels) {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

}  // namespace compass::clustering
