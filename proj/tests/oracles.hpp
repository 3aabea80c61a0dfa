#pragma once

// Independent reference computations used as test oracles. Written directly
// from the definitions, with no sharing of code paths with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double dotp(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

template <typename Matrix>
Rows rows_of(const Matrix& m) {
  Rows out(m.count());
  for (std::size_t i = 0; i < m.count(); ++i) {
    auto r = m.row(i);
    out[i].assign(r.begin(), r.end());
  }
  return out;
}

// O(n^2) silhouette with cosine distance; noise (-1) excluded, singletons 0.
inline double silhouette(const Rows& x, const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) groups[labels[i]].push_back(i);
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& [label, members] : groups) {
    for (std::size_t i : members) {
      ++n;
      if (members.size() == 1) continue;
      double a = 0.0;
      for (std::size_t j : members)
        if (j != i) a += 1.0 - dotp(x[i], x[j]);
      a /= static_cast<double>(members.size() - 1);
      double b = INFINITY;
      for (const auto& [other, om] : groups) {
        if (other == label) continue;
        double s = 0.0;
        for (std::size_t j : om) s += 1.0 - dotp(x[i], x[j]);
        b = std::min(b, s / static_cast<double>(om.size()));
      }
      const double m = std::max(a, b);
      if (m > 0.0) total += (b - a) / m;
    }
  }
  return total / static_cast<double>(n);
}

// DBCV from its definition: all-points core distance by direct power sums,
// Kruskal MST on mutual reachability, internal nodes = MST degree >= 2
// (all nodes and edges when there are none), noise in the size weighting.
inline double dbcv(const Rows& x, const std::vector<int>& labels) {
  const double dim = static_cast<double>(x.at(0).size());
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= 0) groups[labels[i]].push_back(i);
  if (groups.size() < 2) return 0.0;
  std::map<std::size_t, double> core;
  for (const auto& [label, m] : groups) {
    for (std::size_t i : m) {
      if (m.size() == 1) {
        core[i] = 0.0;
        continue;
      }
      double s = 0.0;
      for (std::size_t j : m)
        if (j != i) s += std::pow(1.0 / l2(x[i], x[j]), dim);
      core[i] = std::pow(s / static_cast<double>(m.size() - 1), -1.0 / dim);
    }
  }
  auto mr = [&](std::size_t i, std::size_t j) { return std::max({core[i], core[j], l2(x[i], x[j])}); };
  std::map<int, std::vector<std::size_t>> internal;
  std::map<int, double> dsc;
  for (const auto& [label, m] : groups) {
    std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t b = a + 1; b < m.size(); ++b) edges.emplace_back(mr(m[a], m[b]), a, b);
    std::sort(edges.begin(), edges.end());
    std::vector<std::size_t> parent(m.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    std::vector<std::tuple<double, std::size_t, std::size_t>> tree;
    std::vector<int> degree(m.size(), 0);
    for (const auto& [w, a, b] : edges) {
      const auto ra = find(a), rb = find(b);
      if (ra == rb) continue;
      parent[ra] = rb;
      tree.emplace_back(w, a, b);
      ++degree[a];
      ++degree[b];
    }
    std::vector<std::size_t> inner;
    for (std::size_t v = 0; v < m.size(); ++v)
      if (degree[v] >= 2) inner.push_back(m[v]);
    double s = 0.0;
    bool any = false;
    for (const auto& [w, a, b] : tree)
      if (degree[a] >= 2 && degree[b] >= 2) {
        s = std::max(s, w);
        any = true;
      }
    if (!any)
      for (const auto& [w, a, b] : tree) s = std::max(s, w);
    if (inner.empty()) inner = m;
    internal[label] = inner;
    dsc[label] = s;
  }
  double score = 0.0;
  for (const auto& [label, m] : groups) {
    double dspc = INFINITY;
    for (const auto& [other, om] : groups) {
      if (other == label) continue;
      for (std::size_t i : internal[label])
        for (std::size_t j : internal[other]) dspc = std::min(dspc, mr(i, j));
    }
    const double den = std::max(dspc, dsc[label]);
    const double v = den > 0.0 ? (dspc - dsc[label]) / den : 0.0;
    score += static_cast<double>(m.size()) / static_cast<double>(labels.size()) * v;
  }
  return score;
}

// Adjusted Rand index over all labels (noise treated as its own label).
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double v) { return v * (v - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (auto& [k, v] : table) sum_ij += c2(v);
  for (auto& [k, v] : ra) sum_a += c2(v);
  for (auto& [k, v] : rb) sum_b += c2(v);
  const double n = c2(static_cast<double>(a.size()));
  const double expected = sum_a * sum_b / n;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

// JS divergence in bits written as entropy differences: H(m) - (H(p)+H(q))/2.
inline double js(const std::vector<double>& p, const std::vector<double>& q) {
  auto h = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
      if (x > 0) s -= x * std::log2(x);
    return s;
  };
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return h(m) - 0.5 * (h(p) + h(q));
}

// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
inline double sign_test_p(std::size_t wins, std::size_t n) {
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    double log_c = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                   std::lgamma(static_cast<double>(n - k) + 1);
    p += std::exp(log_c - static_cast<double>(n) * std::log(2.0));
  }
  return p;
}

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen(std::random_device{}());
    path = std::filesystem::temp_directory_path() / ("compass-" + tag + "-" + std::to_string(gen()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace oracle
