#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "compass/core.hpp"

namespace compass {

// Per-cluster tallies by role. Stream records are never counted and noise
// (-1) is tallied separately from the K-indexed table.
struct CountTable {
  std::vector<std::size_t> n_target;
  std::vector<std::size_t> n_aux;
  std::vector<std::size_t> n_eval;
  std::size_t noise_target = 0;
  std::size_t noise_aux = 0;
  std::size_t noise_eval = 0;

  [[nodiscard]] std::size_t clusters() const noexcept { return n_target.size(); }
};

inline CountTable tabulate_counts(const Dataset& ds, const Assignment& asn) {
  require(asn.labels.size() == ds.records.size(), Errc::invalid_argument,
          "assignment has " + std::to_string(asn.labels.size()) + " labels for " +
              std::to_string(ds.records.size()) + " records");
  int max_label = -1;
  for (int l : asn.labels) max_label = std::max(max_label, l);
  const std::size_t k = max_label < 0 ? 0 : std::max<std::size_t>(asn.k, static_cast<std::size_t>(max_label) + 1);
  CountTable t;
  t.n_target.assign(k, 0);
  t.n_aux.assign(k, 0);
  t.n_eval.assign(k, 0);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const int l = asn.labels[i];
    const Role role = ds.records[i].role;
    if (role == Role::stream) continue;
    if (l < 0) {
      (role == Role::target ? t.noise_target : role == Role::aux ? t.noise_aux : t.noise_eval) += 1;
      continue;
    }
    const auto c = static_cast<std::size_t>(l);
    (role == Role::target ? t.n_target : role == Role::aux ? t.n_aux : t.n_eval)[c] += 1;
  }
  return t;
}

struct ClusterMismatch {
  std::size_t n_t = 0;
  std::size_t n_aux = 0;
  std::size_t n_eval = 0;
  double rho = 0.0;  // +inf when the cluster has eval mass but no target data
  double w = 0.0;
  double w_norm = 0.0;

  friend bool operator==(const ClusterMismatch&, const ClusterMismatch&) = default;
};

struct MismatchProfile {
  std::vector<ClusterMismatch> clusters;
  double epsilon = 1.0;
  bool no_eval_signal = false;
  std::size_t noise_target = 0;
  std::size_t noise_aux = 0;
  std::size_t noise_eval = 0;

  [[nodiscard]] std::vector<double> w_norm() const {
    std::vector<double> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) out.push_back(c.w_norm);
    return out;
  }

  friend bool operator==(const MismatchProfile&, const MismatchProfile&) = default;
};

// w_k = n_eval / (n_t + eps) where the cluster holds eval data, else 0;
// rho_k = P_eval(k) / P_train(k) is reported but does not drive sampling.
inline MismatchProfile mismatch_profile(const CountTable& counts, double epsilon = 1.0) {
  require(epsilon > 0.0 && std::isfinite(epsilon), Errc::invalid_argument, "epsilon must be positive");
  const std::size_t k = counts.clusters();
  require(counts.n_aux.size() == k && counts.n_eval.size() == k, Errc::invalid_argument, "ragged count table");
  std::size_t total_t = 0;
  std::size_t total_eval = 0;
  for (std::size_t c = 0; c < k; ++c) {
    total_t += counts.n_target[c];
    total_eval += counts.n_eval[c];
  }
  MismatchProfile p;
  p.epsilon = epsilon;
  p.noise_target = counts.noise_target;
  p.noise_aux = counts.noise_aux;
  p.noise_eval = counts.noise_eval;
  p.clusters.resize(k);
  double w_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    auto& m = p.clusters[c];
    m.n_t = counts.n_target[c];
    m.n_aux = counts.n_aux[c];
    m.n_eval = counts.n_eval[c];
    if (m.n_eval > 0 && m.n_t == 0) {
      m.rho = std::numeric_limits<double>::infinity();
    } else if (m.n_eval > 0) {
      const double p_eval = static_cast<double>(m.n_eval) / static_cast<double>(total_eval);
      const double p_train = static_cast<double>(m.n_t) / static_cast<double>(total_t);
      m.rho = p_eval / p_train;
    }
    m.w = m.n_eval > 0 ? static_cast<double>(m.n_eval) / (static_cast<double>(m.n_t) + epsilon) : 0.0;
    w_sum += m.w;
  }
  p.no_eval_signal = !(w_sum > 0.0);
  if (!p.no_eval_signal)
    for (auto& m : p.clusters) m.w_norm = m.w / w_sum;
  return p;
}

// ---------------------------------------------------------------------------
// Cold-start usage proxies

struct ColdStartMode {
  enum class Kind { self, borrow } kind = Kind::self;
  std::string donor_lang;  // borrow only

  static ColdStartMode self() { return {}; }
  static ColdStartMode borrow(std::string lang) { return {Kind::borrow, std::move(lang)}; }
};

struct ProxyDataset {
  Dataset dataset;
  std::vector<std::size_t> origin;  // row in the input each output row came from
};

// self: target records are cloned as eval (ids suffixed ":proxy").
// borrow: donor-language eval records are relabeled to the target language.
// Pre-existing eval records of other languages are kept.
inline ProxyDataset coldstart_proxy(const Dataset& ds, const ColdStartMode& mode) {
  ProxyDataset out;
  std::vector<std::size_t> rows(ds.records.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  out.origin = rows;
  out.dataset.records = ds.records;

  if (mode.kind == ColdStartMode::Kind::self) {
    std::size_t added = 0;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].role != Role::target) continue;
      ExampleRecord r = ds.records[i];
      r.id += ":proxy";
      r.role = Role::eval;
      out.dataset.records.push_back(std::move(r));
      out.origin.push_back(i);
      ++added;
    }
    require(added > 0, Errc::invalid_argument, "self proxy needs target records");
  } else {
    std::optional<std::string> target_lang;
    for (const auto& r : ds.records) {
      if (r.role == Role::target) {
        target_lang = r.lang;
        break;
      }
    }
    require(target_lang.has_value(), Errc::invalid_argument, "borrow proxy needs target records to name the language");
    std::size_t relabeled = 0;
    for (auto& r : out.dataset.records) {
      if (r.role == Role::eval && r.lang == mode.donor_lang) {
        r.lang = *target_lang;
        ++relabeled;
      }
    }
    require(relabeled > 0, Errc::invalid_argument, "no eval records in donor language '" + mode.donor_lang + "'");
  }
  out.dataset.embeddings = ds.embeddings.select(out.origin);
  return out;
}

}  // namespace compass
