#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "compass/error.hpp"

namespace compass {

inline constexpr double kNormTolerance = 1e-4;

enum class Role { target, aux, eval, stream };

constexpr std::string_view to_string(Role role) {
  switch (role) {
    case Role::target: return "target";
    case Role::aux: return "aux";
    case Role::eval: return "eval";
    case Role::stream: return "stream";
  }
  return "unknown";
}

inline std::optional<Role> parse_role(std::string_view text) {
  if (text == "target") return Role::target;
  if (text == "aux") return Role::aux;
  if (text == "eval") return Role::eval;
  if (text == "stream") return Role::stream;
  return std::nullopt;
}

struct ExampleRecord {
  std::string id;
  std::string lang;  // opaque tag, never canonicalized
  Role role = Role::aux;
  std::optional<std::string> subject;
  std::optional<std::string> text;

  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

// Row-major n x d float32 matrix. Immutable once built.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> data)
      : dim_(dim), count_(count), data_(std::move(data)) {
    require(data_.size() == dim_ * count_, Errc::invalid_argument,
            "embedding buffer size does not match dim*count");
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t count() const noexcept { return count_; }
  [[nodiscard]] bool empty() const noexcept { return count_ == 0; }
  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }

  // Gathers the given rows into a new matrix.
  [[nodiscard]] EmbeddingMatrix select(std::span<const std::size_t> rows) const {
    std::vector<float> out;
    out.reserve(rows.size() * dim_);
    for (std::size_t r : rows) {
      auto src = row(r);
      out.insert(out.end(), src.begin(), src.end());
    }
    return {dim_, rows.size(), std::move(out)};
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

struct Dataset {
  std::vector<ExampleRecord> records;
  EmbeddingMatrix embeddings;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] std::size_t count(Role role) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [role](const auto& r) { return r.role == role; }));
  }
};

// ---------------------------------------------------------------------------
// Geometry on unit vectors. Accumulation is always in double.

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

inline double cosine_distance(std::span<const float> a, std::span<const float> b) { return 1.0 - dot(a, b); }

inline double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Normalizes v to unit length; returns false (leaving out untouched) if v is ~0.
inline bool normalize_into(std::span<const double> v, std::span<float> out) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (!(n > 1e-12)) return false;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return true;
}

// ---------------------------------------------------------------------------

enum class ClusterMethod { kmeans, agglomerative, density, butina };

constexpr std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::agglomerative: return "agglomerative";
    case ClusterMethod::density: return "density";
    case ClusterMethod::butina: return "butina";
  }
  return "unknown";
}

inline std::optional<ClusterMethod> parse_method(std::string_view text) {
  if (text == "kmeans") return ClusterMethod::kmeans;
  if (text == "agglomerative") return ClusterMethod::agglomerative;
  if (text == "density") return ClusterMethod::density;
  if (text == "butina") return ClusterMethod::butina;
  return std::nullopt;
}

// Condensed HDBSCAN* tree. Cluster 0 is the root; children always have a
// larger index than their parent. Fitted points hang off the cluster they
// fall out of, at the lambda (1/distance) where that happens.
struct CondensedTree {
  struct Node {
    int parent = -1;
    double birth_lambda = 0.0;
    std::size_t size = 0;
    double stability = 0.0;
    bool selected = false;
    int label = -1;  // label of the selected ancestor-or-self, -1 if none

    friend bool operator==(const Node&, const Node&) = default;
  };

  std::vector<Node> nodes;
  std::vector<int> point_parent;
  std::vector<double> point_lambda;

  friend bool operator==(const CondensedTree&, const CondensedTree&) = default;
};

// State retained by density models for transductive assignment.
struct DensityHierarchy {
  std::size_t min_cluster_size = 0;
  std::size_t min_samples = 0;
  EmbeddingMatrix points;
  std::vector<double> core_distances;
  CondensedTree tree;

  friend bool operator==(const DensityHierarchy&, const DensityHierarchy&) = default;
};

struct ClusterModel {
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // k x dim, unit rows
  std::optional<DensityHierarchy> hierarchy;
  std::map<std::string, double> params;

  [[nodiscard]] std::span<const float> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

struct Assignment {
  std::vector<int> labels;  // -1 = noise
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string kind;  // "normalization", "duplicate-id", "count-mismatch", ...
  std::vector<std::size_t> rows;
  std::string detail;
};

inline std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  const auto& m = ds.embeddings;
  if (ds.records.empty()) {
    out.push_back({"empty-dataset", {}, "dataset has no records"});
  }
  if (m.count() != ds.records.size()) {
    out.push_back({"count-mismatch", {},
                   "embeddings hold " + std::to_string(m.count()) + " rows for " +
                       std::to_string(ds.records.size()) + " records"});
  }
  if (m.count() > 0 && m.dim() == 0) {
    out.push_back({"dimension", {}, "embedding dimension is zero"});
  }
  for (std::size_t i = 0; i < m.count() && m.dim() > 0; ++i) {
    const double n = norm(m.row(i));
    if (!std::isfinite(n) || std::abs(n - 1.0) > kNormTolerance) {
      out.push_back({"normalization", {i}, "row norm " + std::to_string(n)});
    }
  }
  std::unordered_map<std::string_view, std::vector<std::size_t>> seen;
  std::vector<std::string_view> order;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    auto& rows = seen[ds.records[i].id];
    if (rows.empty()) order.push_back(ds.records[i].id);
    rows.push_back(i);
  }
  for (auto id : order) {
    const auto& rows = seen[id];
    if (rows.size() > 1) out.push_back({"duplicate-id", rows, "id '" + std::string(id) + "'"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adapter routing

enum class RouteSource { language_adapter, target_only_adapter, pretrained_base };

struct AdapterRegistry {
  std::map<std::string, std::string> entries;      // lang -> distribution-matched adapter
  std::map<std::string, std::string> target_only;  // lang -> adapter trained on target data only
  std::optional<std::string> base_model;

  static constexpr RouteSource policy[] = {RouteSource::language_adapter, RouteSource::target_only_adapter,
                                           RouteSource::pretrained_base};
};

struct Route {
  std::string adapter;
  RouteSource source;
};

inline Route resolve_route(std::string_view lang, const AdapterRegistry& reg, bool has_target_data) {
  const std::string key(lang);
  for (RouteSource step : AdapterRegistry::policy) {
    switch (step) {
      case RouteSource::language_adapter:
        if (auto it = reg.entries.find(key); it != reg.entries.end()) return {it->second, step};
        break;
      case RouteSource::target_only_adapter:
        if (has_target_data) {
          if (auto it = reg.target_only.find(key); it != reg.target_only.end()) return {it->second, step};
        }
        break;
      case RouteSource::pretrained_base:
        if (reg.base_model) return {*reg.base_model, step};
        break;
    }
  }
  throw Error(Errc::invalid_argument, "no adapter for '" + key + "' and no pretrained base configured");
}

inline std::string resolve_adapter(std::string_view lang, const AdapterRegistry& reg, bool has_target_data) {
  return resolve_route(lang, reg, has_target_data).adapter;
}

}  // namespace compass
