#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "compass/core.hpp"
#include "compass/mismatch.hpp"
#include "compass/random.hpp"

namespace compass {

inline constexpr double kWeightFloor = 1e-6;
inline constexpr std::size_t kMaxPicksPerExample = 3;

struct SamplingConfig {
  double budget = 0.8;
  double tau_sim = 0.90;
  double delta = 0.20;
  std::uint64_t seed = 0;
  bool replacement_mode = false;
};

struct Selection {
  std::string id;
  std::size_t cluster = 0;
  double alpha = 0.0;       // quota progress when picked
  double score = 0.0;       // blended score minus diversity penalty
  double weight = 0.0;      // categorical weight after floor and decay
  std::size_t pick_count = 1;  // 1-based pick number of this example

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct SamplingPlan {
  double budget = 0.8;
  std::size_t target_size = 0;
  std::uint64_t seed = 0;
  double tau_sim = 0.90;
  double delta = 0.20;
  bool replacement_mode = false;
  std::vector<std::size_t> quotas;
  std::vector<Selection> selections;
  bool underfilled = false;
  std::vector<std::size_t> shortfall;  // per cluster

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

// Stochastic rounding of w_norm_k * B * |D_t|.
inline std::vector<std::size_t> compute_quotas(const std::vector<double>& w_norm, double budget, std::size_t target_size,
                                               Rng& rng) {
  std::vector<std::size_t> q(w_norm.size(), 0);
  for (std::size_t k = 0; k < w_norm.size(); ++k) {
    if (!(w_norm[k] > 0.0)) continue;
    const double raw = w_norm[k] * budget * static_cast<double>(target_size);
    const double base = std::floor(raw);
    q[k] = static_cast<std::size_t>(base) + (rng.bernoulli(raw - base) ? 1 : 0);
  }
  return q;
}

// Static per-candidate scores for one cluster.
struct CandidateScores {
  std::vector<double> proto;     // 1 / (1 + d(x, mu_k))
  std::vector<double> boundary;  // 1 nearest the decision boundary, 0 deepest inside
  std::vector<double> margin;    // min_{j != k} d(x, mu_j) - d(x, mu_k)
};

// Prototypical and boundary scores with cosine distance. The margin is
// min-max normalized over the pool and flipped so that small margins (points
// close to a competing centroid) score high. A single-centroid model or a
// pool with no margin spread scores 0.5 everywhere.
inline CandidateScores candidate_scores(std::size_t cluster, std::span<const std::size_t> rows,
                                        const EmbeddingMatrix& x, const ClusterModel& model) {
  CandidateScores s;
  s.proto.resize(rows.size());
  s.boundary.assign(rows.size(), 0.5);
  s.margin.assign(rows.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto row = x.row(rows[i]);
    const double own = cosine_distance(row, model.centroid(cluster));
    s.proto[i] = 1.0 / (1.0 + std::max(0.0, own));
    double other = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < model.k; ++j)
      if (j != cluster) other = std::min(other, cosine_distance(row, model.centroid(j)));
    s.margin[i] = model.k >= 2 ? other - own : 0.0;
  }
  if (model.k < 2 || rows.empty()) return s;
  const auto [lo, hi] = std::minmax_element(s.margin.begin(), s.margin.end());
  const double range = *hi - *lo;
  if (!(range > 1e-12)) return s;
  for (std::size_t i = 0; i < rows.size(); ++i) s.boundary[i] = (*hi - s.margin[i]) / range;
  return s;
}

inline double blend_score(double proto, double boundary, double alpha) {
  const double a2 = alpha * alpha;
  return (1.0 - a2) * proto + a2 * boundary;
}

// Scores s(x) for a cluster's candidates at a given quota progress alpha.
inline std::vector<double> instance_scores(std::size_t cluster, std::span<const std::size_t> rows,
                                           const EmbeddingMatrix& x, const ClusterModel& model,
                                           const Assignment& asn, double alpha) {
  require(alpha >= 0.0 && alpha <= 1.0, Errc::invalid_argument, "alpha must be in [0, 1]");
  for (std::size_t r : rows)
    require(asn.labels.at(r) == static_cast<int>(cluster), Errc::invalid_argument,
            "row " + std::to_string(r) + " is not assigned to cluster " + std::to_string(cluster));
  const auto s = candidate_scores(cluster, rows, x, model);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = blend_score(s.proto[i], s.boundary[i], alpha);
  return out;
}

namespace detail {

struct ClusterDraw {
  std::vector<Selection> picks;
  std::size_t shortfall = 0;
};

inline ClusterDraw sample_cluster(std::size_t k, std::size_t quota, const std::vector<std::size_t>& rows,
                                  const Dataset& ds, const ClusterModel& model, const SamplingConfig& cfg, Rng& rng) {
  ClusterDraw out;
  if (quota == 0) return out;
  const std::size_t m = rows.size();
  const auto scores = candidate_scores(k, rows, ds.embeddings, model);

  std::vector<std::vector<std::size_t>> neighbors(m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      if (dot(ds.embeddings.row(rows[a]), ds.embeddings.row(rows[b])) > cfg.tau_sim) {
        neighbors[a].push_back(b);
        neighbors[b].push_back(a);
      }

  std::vector<std::size_t> penalty(m, 0);
  std::vector<std::size_t> picks(m, 0);
  std::vector<bool> available(m, true);
  std::size_t remaining = m;
  std::vector<double> weights(m, 0.0);
  std::vector<double> penalized(m, 0.0);
  const std::size_t cap = cfg.replacement_mode ? kMaxPicksPerExample : 1;

  std::size_t sampled = 0;
  while (sampled < quota && remaining > 0) {
    const double alpha = std::min(1.0, static_cast<double>(sampled) / static_cast<double>(quota));
    for (std::size_t i = 0; i < m; ++i) {
      if (!available[i]) {
        weights[i] = 0.0;
        continue;
      }
      penalized[i] = blend_score(scores.proto[i], scores.boundary[i], alpha) - cfg.delta * static_cast<double>(penalty[i]);
      weights[i] = std::max(penalized[i], kWeightFloor) * std::pow(0.5, static_cast<double>(picks[i]));
    }
    const std::size_t pick = rng.categorical(weights);
    if (picks[pick] == 0)
      for (std::size_t nb : neighbors[pick]) ++penalty[nb];
    ++picks[pick];
    out.picks.push_back({ds.records[rows[pick]].id, k, alpha, penalized[pick], weights[pick], picks[pick]});
    if (picks[pick] >= cap) {
      available[pick] = false;
      --remaining;
    }
    ++sampled;
  }
  out.shortfall = quota - sampled;
  return out;
}

}  // namespace detail

// Quotas from the profile, then per cluster a sequential categorical draw
// over the cluster's aux candidates with curriculum blending, diversity
// penalty, and (in replacement mode) 0.5^n decay capped at three picks.
inline SamplingPlan run_sampling(const Dataset& ds, const Assignment& asn, const MismatchProfile& profile,
                                 const ClusterModel& model, const SamplingConfig& cfg) {
  require(cfg.budget > 0.0, Errc::invalid_argument, "budget must be positive");
  require(asn.labels.size() == ds.records.size(), Errc::invalid_argument, "assignment does not cover records");
  require(profile.clusters.size() <= model.k, Errc::invalid_argument,
          "profile has more clusters than the model");
  require(ds.embeddings.dim() == model.dim, Errc::dimension_mismatch, "embedding and model dimensions differ");
  const std::size_t k = profile.clusters.size();

  SamplingPlan plan;
  plan.budget = cfg.budget;
  plan.target_size = ds.count(Role::target);
  plan.seed = cfg.seed;
  plan.tau_sim = cfg.tau_sim;
  plan.delta = cfg.delta;
  plan.replacement_mode = cfg.replacement_mode;

  Rng quota_rng(derive_seed(cfg.seed, fnv1a("quota")));
  plan.quotas = compute_quotas(profile.w_norm(), cfg.budget, plan.target_size, quota_rng);

  std::vector<std::vector<std::size_t>> pools(k);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const int l = asn.labels[i];
    if (ds.records[i].role == Role::aux && l >= 0 && static_cast<std::size_t>(l) < k)
      pools[static_cast<std::size_t>(l)].push_back(i);
  }
  plan.shortfall.assign(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    Rng rng(derive_seed(cfg.seed, fnv1a("cluster"), c));
    auto draw = detail::sample_cluster(c, plan.quotas[c], pools[c], ds, model, cfg, rng);
    plan.shortfall[c] = draw.shortfall;
    plan.underfilled = plan.underfilled || draw.shortfall > 0;
    plan.selections.insert(plan.selections.end(), std::make_move_iterator(draw.picks.begin()),
                           std::make_move_iterator(draw.picks.end()));
  }
  return plan;
}

// Trainer-facing listing of the training set D_t plus the selection.
struct Manifest {
  std::vector<std::string> target_ids;
  std::vector<std::string> selected_ids;  // selection order, repeats kept

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline Manifest make_manifest(const Dataset& ds, const SamplingPlan& plan) {
  Manifest m;
  for (const auto& r : ds.records)
    if (r.role == Role::target) m.target_ids.push_back(r.id);
  for (const auto& s : plan.selections) m.selected_ids.push_back(s.id);
  return m;
}

}  // namespace compass
