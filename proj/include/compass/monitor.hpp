#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "compass/clustering/assign.hpp"
#include "compass/clustering/common.hpp"
#include "compass/core.hpp"
#include "compass/sampler.hpp"

namespace compass {

// ---------------------------------------------------------------------------
// Divergence

inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), Errc::invalid_argument, "distributions differ in length");
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, Errc::invalid_argument, "negative probability");
    sp += p[i];
    sq += q[i];
  }
  require(std::abs(sp - 1.0) <= 1e-9 && std::abs(sq - 1.0) <= 1e-9, Errc::invalid_argument,
          "distributions must sum to 1");
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

inline std::vector<double> normalize_counts(std::span<const std::size_t> counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  require(total > 0.0, Errc::invalid_argument, "all counts are zero");
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / total;
  return out;
}

// P_ref(k) proportional to n_eval(k) + n_selected(k).
inline std::vector<double> build_reference(std::span<const std::size_t> n_eval, std::span<const std::size_t> n_selected) {
  require(n_eval.size() == n_selected.size(), Errc::invalid_argument, "count vectors differ in length");
  std::vector<std::size_t> sum(n_eval.size());
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = n_eval[k] + n_selected[k];
  return normalize_counts(sum);
}

// ---------------------------------------------------------------------------
// Monitor state

struct JsSample {
  std::size_t index = 0;  // observations seen when the check ran
  double js = 0.0;

  friend bool operator==(const JsSample&, const JsSample&) = default;
};

struct TriggerEvent {
  std::size_t index = 0;
  double js = 0.0;
  double theta = 0.0;

  friend bool operator==(const TriggerEvent&, const TriggerEvent&) = default;
};

struct WindowEntry {
  std::string id;
  int cluster = -1;

  friend bool operator==(const WindowEntry&, const WindowEntry&) = default;
};

// Cluster distributions carry K + 1 bins; the last bin collects noise (-1).
struct MonitorState {
  std::size_t n_clusters = 0;
  std::vector<double> p_ref;
  std::deque<WindowEntry> window;
  std::size_t window_capacity = 1000;
  double theta_js = 0.15;
  double eta = 0.1;
  std::size_t observed = 0;
  std::vector<JsSample> js_history;
  std::vector<TriggerEvent> triggers;

  friend bool operator==(const MonitorState&, const MonitorState&) = default;
};

struct MonitorOptions {
  std::size_t window_capacity = 1000;
  double theta_js = 0.15;
  double eta = 0.1;
};

inline std::vector<double> with_noise_bin(std::vector<double> p) {
  p.push_back(0.0);
  return p;
}

inline MonitorState make_monitor(std::vector<double> p_ref_clusters, const MonitorOptions& opt = {}) {
  require(opt.window_capacity >= 1, Errc::invalid_argument, "window capacity must be positive");
  require(opt.theta_js > 0.0 && opt.theta_js < 1.0, Errc::invalid_argument, "theta_js must be in (0, 1)");
  require(opt.eta >= 0.0 && opt.eta <= 1.0, Errc::invalid_argument, "eta must be in [0, 1]");
  MonitorState s;
  s.n_clusters = p_ref_clusters.size();
  s.p_ref = with_noise_bin(std::move(p_ref_clusters));
  s.window_capacity = opt.window_capacity;
  s.theta_js = opt.theta_js;
  s.eta = opt.eta;
  return s;
}

// Replaces p_ref after a completed update cycle (noise bin starts at 0).
inline void rebuild_reference(MonitorState& state, std::span<const std::size_t> n_eval,
                              std::span<const std::size_t> n_selected) {
  require(n_eval.size() == state.n_clusters, Errc::invalid_argument, "reference counts do not match K");
  state.p_ref = with_noise_bin(build_reference(n_eval, n_selected));
}

inline std::vector<double> monitoring_distribution(const MonitorState& state) {
  std::vector<double> p(state.n_clusters + 1, 0.0);
  if (state.window.empty()) return p;
  for (const auto& e : state.window) p[e.cluster < 0 ? state.n_clusters : static_cast<std::size_t>(e.cluster)] += 1.0;
  for (double& v : p) v /= static_cast<double>(state.window.size());
  return p;
}

inline std::vector<std::size_t> window_counts(const MonitorState& state) {
  std::vector<std::size_t> c(state.n_clusters, 0);
  for (const auto& e : state.window)
    if (e.cluster >= 0) ++c[static_cast<std::size_t>(e.cluster)];
  return c;
}

inline std::vector<double> observe(MonitorState& state, std::string id, int cluster) {
  require(cluster >= -1 && cluster < static_cast<int>(state.n_clusters), Errc::invalid_argument,
          "cluster label " + std::to_string(cluster) + " outside model");
  state.window.push_back({std::move(id), cluster});
  while (state.window.size() > state.window_capacity) state.window.pop_front();
  ++state.observed;
  return monitoring_distribution(state);
}

struct TriggerCheck {
  bool fire = false;
  double js = 0.0;
  bool window_empty = false;
};

inline TriggerCheck check_trigger(MonitorState& state, std::span<const double> p_mon) {
  if (state.window.empty()) return {false, 0.0, true};
  require(p_mon.size() == state.p_ref.size(), Errc::invalid_argument, "p_mon and p_ref bins differ");
  TriggerCheck out;
  out.js = js_divergence(state.p_ref, p_mon);
  out.fire = out.js > state.theta_js;
  state.js_history.push_back({state.observed, out.js});
  if (out.fire) state.triggers.push_back({state.observed, out.js, state.theta_js});
  return out;
}

inline TriggerCheck check_trigger(MonitorState& state) {
  const auto p_mon = monitoring_distribution(state);
  return check_trigger(state, p_mon);
}

struct ReplayOptions {
  std::size_t increment = 500;  // observations between checks
  // On a fire, treat the window as the completed cycle's eval data and rebuild p_ref from it.
  bool rebuild_on_fire = false;
};

struct ReplayResult {
  std::vector<TriggerCheck> checks;
  bool any_fired = false;
};

// Feeds labels in order, checking every `increment` observations and once
// more at the end if the stream length is not a multiple of it.
inline ReplayResult replay(MonitorState& state, std::span<const std::string> ids, std::span<const int> labels,
                           const ReplayOptions& opt = {}) {
  require(ids.size() == labels.size(), Errc::invalid_argument, "ids and labels differ in length");
  require(opt.increment >= 1, Errc::invalid_argument, "increment must be positive");
  ReplayResult out;
  auto run_check = [&] {
    const auto c = check_trigger(state);
    out.checks.push_back(c);
    if (c.fire) {
      out.any_fired = true;
      if (opt.rebuild_on_fire) {
        const auto counts = window_counts(state);
        const std::vector<std::size_t> none(counts.size(), 0);
        if (std::any_of(counts.begin(), counts.end(), [](std::size_t v) { return v > 0; }))
          rebuild_reference(state, counts, none);
      }
    }
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    observe(state, ids[i], labels[i]);
    if ((i + 1) % opt.increment == 0) run_check();
  }
  if (labels.empty() || labels.size() % opt.increment != 0) run_check();
  return out;
}

// ---------------------------------------------------------------------------
// Incremental clustering

// mu_k <- normalize((1 - eta) mu_k + eta mean(X_k)) for clusters receiving points.
inline ClusterModel incremental_kmeans_update(const ClusterModel& model, const EmbeddingMatrix& x_new,
                                              const std::vector<int>& labels, double eta) {
  require(eta >= 0.0 && eta <= 1.0, Errc::invalid_argument, "eta must be in [0, 1]");
  require(model.method == ClusterMethod::kmeans || model.method == ClusterMethod::agglomerative,
          Errc::invalid_argument, "incremental update needs a centroid model");
  require(labels.size() == x_new.count(), Errc::invalid_argument, "labels do not match points");
  require(x_new.empty() || x_new.dim() == model.dim, Errc::dimension_mismatch, "dimension mismatch");
  const std::size_t dim = model.dim;
  std::vector<double> sums(model.k * dim, 0.0);
  std::vector<std::size_t> sizes(model.k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    const auto c = static_cast<std::size_t>(labels[i]);
    require(c < model.k, Errc::invalid_argument, "label outside model");
    ++sizes[c];
    auto row = x_new.row(i);
    for (std::size_t t = 0; t < dim; ++t) sums[c * dim + t] += row[t];
  }
  ClusterModel out = model;
  std::vector<double> blended(dim);
  for (std::size_t c = 0; c < model.k; ++c) {
    if (sizes[c] == 0) continue;
    auto mu = model.centroid(c);
    for (std::size_t t = 0; t < dim; ++t) {
      const double mean = sums[c * dim + t] / static_cast<double>(sizes[c]);
      blended[t] = (1.0 - eta) * static_cast<double>(mu[t]) + eta * mean;
    }
    normalize_into(blended, std::span<float>(out.centroids.data() + c * dim, dim));
  }
  return out;
}

// Transductive assignment against the fixed condensed tree.
inline Assignment incremental_density_assign(const ClusterModel& model, const EmbeddingMatrix& x_new) {
  require(model.method == ClusterMethod::density, Errc::invalid_argument, "model is not a density model");
  return clustering::assign_density(x_new, model);
}

// ---------------------------------------------------------------------------
// Anchors and recipe

struct Anchor {
  std::string id;
  std::size_t cluster = 0;
  double distance = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct AnchorBuffer {
  double fraction = 0.05;
  std::size_t training_size = 0;
  std::vector<Anchor> anchors;

  friend bool operator==(const AnchorBuffer&, const AnchorBuffer&) = default;
};

// Largest-remainder split of total across clusters proportional to mass;
// equal remainders go to the lower cluster index.
inline std::vector<std::size_t> largest_remainder(std::span<const std::size_t> mass, std::size_t total) {
  std::vector<std::size_t> out(mass.size(), 0);
  std::size_t sum = 0;
  for (auto m : mass) sum += m;
  if (sum == 0 || total == 0) return out;
  total = std::min(total, sum);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    const double exact = static_cast<double>(total) * static_cast<double>(mass[k]) / static_cast<double>(sum);
    out[k] = static_cast<std::size_t>(std::floor(exact));
    given += out[k];
    remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; given < total && i < remainders.size(); ++i) {
    if (out[remainders[i].second] < mass[remainders[i].second]) {
      ++out[remainders[i].second];
      ++given;
    }
  }
  return out;
}

// Picks round(fraction * N) anchors from the training set: clusters get
// largest-remainder shares of their mass, and each cluster contributes its
// members closest to the centroid (cosine distance, id breaks ties).
inline AnchorBuffer select_anchors(const Dataset& training, const Assignment& asn, const ClusterModel& model,
                                   double fraction = 0.05) {
  require(fraction >= 0.0 && fraction <= 1.0, Errc::invalid_argument, "fraction must be in [0, 1]");
  require(asn.labels.size() == training.records.size(), Errc::invalid_argument, "assignment does not cover records");
  AnchorBuffer buf;
  buf.fraction = fraction;
  buf.training_size = training.records.size();
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(buf.training_size)));

  std::vector<std::vector<Anchor>> members(model.k);
  for (std::size_t i = 0; i < training.records.size(); ++i) {
    const int l = asn.labels[i];
    if (l < 0) continue;
    const auto c = static_cast<std::size_t>(l);
    require(c < model.k, Errc::invalid_argument, "label outside model");
    members[c].push_back({training.records[i].id, c, cosine_distance(training.embeddings.row(i), model.centroid(c))});
  }
  std::vector<std::size_t> mass(model.k);
  for (std::size_t c = 0; c < model.k; ++c) mass[c] = members[c].size();
  const auto alloc = largest_remainder(mass, total);
  for (std::size_t c = 0; c < model.k; ++c) {
    auto& list = members[c];
    std::sort(list.begin(), list.end(), [](const Anchor& a, const Anchor& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    buf.anchors.insert(buf.anchors.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(alloc[c]));
  }
  return buf;
}

inline constexpr std::string_view kLossTag = "ECDA-v1";

struct TrainingRecipe {
  std::string manifest;
  std::vector<std::string> anchor_ids;
  double lambda = 2.0;
  double beta = 0.1;
  std::string loss = std::string(kLossTag);
  std::size_t epochs = 5;

  friend bool operator==(const TrainingRecipe&, const TrainingRecipe&) = default;
};

struct RecipeOptions {
  std::string manifest_path;
  double lambda = 2.0;
  double beta = 0.1;
  std::size_t epochs = 5;
};

// Names the data and hyperparameters for
//   L_total = L_task(D_new) + beta * L_DAR(anchors) + (lambda/2) sum_j F_j (theta_j - theta_j^prev)^2
// with the Fisher diagonal estimated on the anchors. The trainer executes it.
inline TrainingRecipe emit_recipe(const SamplingPlan& plan, const AnchorBuffer& anchors,
                                  const std::vector<std::string>& previous_training_ids, const RecipeOptions& opt) {
  require(opt.lambda >= 0.0 && std::isfinite(opt.lambda), Errc::invalid_argument, "lambda must be >= 0");
  require(opt.beta >= 0.0 && std::isfinite(opt.beta), Errc::invalid_argument, "beta must be >= 0");
  require(opt.epochs >= 1, Errc::invalid_argument, "epochs must be positive");
  require(plan.budget > 0.0, Errc::invalid_argument, "plan has no budget");
  const std::set<std::string_view> previous(previous_training_ids.begin(), previous_training_ids.end());
  TrainingRecipe r;
  r.manifest = opt.manifest_path;
  r.lambda = opt.lambda;
  r.beta = opt.beta;
  r.epochs = opt.epochs;
  for (const auto& a : anchors.anchors) {
    require(previous.contains(a.id), Errc::unknown_id, "anchor '" + a.id + "' is not in the previous training set");
    r.anchor_ids.push_back(a.id);
  }
  return r;
}

}  // namespace compass
