#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "compass/core.hpp"
#include "compass/random.hpp"

namespace compass::sim {

namespace detail {

inline void random_unit(Rng& rng, std::vector<double>& v) {
  do {
    for (double& x : v) x = rng.normal();
  } while (std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)) < 1e-9);
}

// center + N(0, spread^2 I), renormalized; falls back to the center if the
// perturbed vector collapses to zero.
inline void perturb(Rng& rng, std::span<const float> center, double spread, std::vector<double>& scratch,
                    std::span<float> out) {
  for (std::size_t t = 0; t < center.size(); ++t) scratch[t] = static_cast<double>(center[t]) + spread * rng.normal();
  if (!normalize_into(scratch, out)) std::copy(center.begin(), center.end(), out.begin());
}

}  // namespace detail

struct BlobSpec {
  std::size_t n_clusters = 3;
  std::size_t points_per_cluster = 20;
  std::size_t dim = 8;
  double spread = 0.05;
  std::uint64_t seed = 0;
  std::size_t noise_points = 0;  // uniform directions, labeled -1 in truth
  Role role = Role::aux;
  std::string lang = "xx";
  std::string id_prefix = "b";
};

struct Blobs {
  Dataset dataset;
  std::vector<int> truth;
  std::vector<float> centers;  // n_clusters x dim
};

// Rows are ordered cluster by cluster, noise points last.
inline Blobs gen_blobs(const BlobSpec& spec) {
  require(spec.dim >= 2, Errc::invalid_argument, "dim must be >= 2");
  require(spec.spread >= 0.0 && std::isfinite(spec.spread), Errc::invalid_argument, "spread must be >= 0");
  Rng rng(derive_seed(spec.seed, fnv1a("blobs")));
  const std::size_t d = spec.dim;
  Blobs out;
  out.centers.resize(spec.n_clusters * d);
  std::vector<double> scratch(d);
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    detail::random_unit(rng, scratch);
    normalize_into(scratch, std::span<float>(out.centers.data() + c * d, d));
  }
  const std::size_t n = spec.n_clusters * spec.points_per_cluster + spec.noise_points;
  std::vector<float> data(n * d);
  out.truth.reserve(n);
  auto& records = out.dataset.records;
  records.reserve(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    const std::span<const float> center(out.centers.data() + c * d, d);
    for (std::size_t p = 0; p < spec.points_per_cluster; ++p, ++row) {
      detail::perturb(rng, center, spec.spread, scratch, std::span<float>(data.data() + row * d, d));
      out.truth.push_back(static_cast<int>(c));
      records.push_back({spec.id_prefix + std::to_string(row), spec.lang, spec.role, std::nullopt, std::nullopt});
    }
  }
  for (std::size_t p = 0; p < spec.noise_points; ++p, ++row) {
    detail::random_unit(rng, scratch);
    normalize_into(scratch, std::span<float>(data.data() + row * d, d));
    out.truth.push_back(-1);
    records.push_back({spec.id_prefix + std::to_string(row), spec.lang, spec.role, std::nullopt, std::nullopt});
  }
  out.dataset.embeddings = EmbeddingMatrix(d, n, std::move(data));
  return out;
}

// ---------------------------------------------------------------------------
// Role-mixture fixture: shared cluster centers, per-role cluster mixtures.

struct MixtureFixtureSpec {
  std::size_t dim = 16;
  double spread = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> target_mix{0.40, 0.30, 0.15, 0.10, 0.05};
  std::vector<double> eval_mix{0.10, 0.15, 0.20, 0.25, 0.30};
  std::vector<double> aux_mix{0.2, 0.2, 0.2, 0.2, 0.2};
  std::size_t n_target = 200;
  std::size_t n_eval = 200;
  std::size_t n_aux = 1000;
  std::string lang = "sw";
  std::string aux_lang = "en";
  std::size_t subjects = 0;  // > 0 tags target records with subject "s<i mod subjects>"
};

struct MixtureFixture {
  Dataset dataset;
  std::vector<int> truth;
  std::vector<float> centers;
};

// Exact per-cluster counts: floor of mix * n plus largest remainders.
inline std::vector<std::size_t> mixture_counts(std::span<const double> mix, std::size_t n) {
  std::vector<std::size_t> out(mix.size(), 0);
  double total = 0.0;
  for (double w : mix) total += w;
  require(total > 0.0, Errc::invalid_argument, "mixture has no mass");
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t given = 0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double exact = mix[k] / total * static_cast<double>(n);
    out[k] = static_cast<std::size_t>(std::floor(exact));
    given += out[k];
    rem.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; given < n; ++i, ++given) ++out[rem[i % rem.size()].second];
  return out;
}

inline MixtureFixture gen_mixture_fixture(const MixtureFixtureSpec& spec) {
  const std::size_t k = spec.target_mix.size();
  require(k >= 1 && spec.eval_mix.size() == k && spec.aux_mix.size() == k, Errc::invalid_argument,
          "role mixtures must have equal length");
  require(spec.dim >= 2, Errc::invalid_argument, "dim must be >= 2");
  Rng rng(derive_seed(spec.seed, fnv1a("mixture")));
  const std::size_t d = spec.dim;
  MixtureFixture out;
  out.centers.resize(k * d);
  std::vector<double> scratch(d);
  for (std::size_t c = 0; c < k; ++c) {
    detail::random_unit(rng, scratch);
    normalize_into(scratch, std::span<float>(out.centers.data() + c * d, d));
  }
  std::vector<float> data;
  struct RoleSpec {
    Role role;
    const std::vector<double>* mix;
    std::size_t n;
    const std::string* lang;
    const char* prefix;
  };
  const RoleSpec roles[] = {{Role::target, &spec.target_mix, spec.n_target, &spec.lang, "t"},
                            {Role::aux, &spec.aux_mix, spec.n_aux, &spec.aux_lang, "a"},
                            {Role::eval, &spec.eval_mix, spec.n_eval, &spec.lang, "e"}};
  std::vector<float> row(d);
  for (const auto& r : roles) {
    const auto counts = mixture_counts(*r.mix, r.n);
    std::size_t serial = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const std::span<const float> center(out.centers.data() + c * d, d);
      for (std::size_t i = 0; i < counts[c]; ++i, ++serial) {
        detail::perturb(rng, center, spec.spread, scratch, row);
        data.insert(data.end(), row.begin(), row.end());
        out.truth.push_back(static_cast<int>(c));
        ExampleRecord rec{r.prefix + std::to_string(serial), *r.lang, r.role, std::nullopt, std::nullopt};
        if (r.role == Role::target && spec.subjects > 0) rec.subject = "s" + std::to_string(serial % spec.subjects);
        out.dataset.records.push_back(std::move(rec));
      }
    }
  }
  const std::size_t n = out.truth.size();
  out.dataset.embeddings = EmbeddingMatrix(d, n, std::move(data));
  return out;
}

// ---------------------------------------------------------------------------
// Subject-bias simulation

struct BiasResult {
  Dataset dataset;
  std::vector<std::string> bucketed;  // "lang/subject", sorted
  std::vector<std::size_t> kept_rows;  // rows of the input, in order
};

// Per language (RNG stream from (seed, lang)), each target subject enters the
// low bucket with bucket_prob; a bucketed subject keeps llround(retain_frac * n)
// of its n records, chosen uniformly. Non-target records always pass.
inline BiasResult bias_simulate(const Dataset& ds, double bucket_prob = 0.2, double retain_frac = 0.5,
                                std::uint64_t seed = 0) {
  require(bucket_prob >= 0.0 && bucket_prob <= 1.0, Errc::invalid_argument, "bucket_prob must be in [0, 1]");
  require(retain_frac >= 0.0 && retain_frac <= 1.0, Errc::invalid_argument, "retain_frac must be in [0, 1]");
  // lang -> subject -> rows (std::map keeps both levels sorted)
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.role != Role::target) continue;
    require(r.subject.has_value(), Errc::missing_key, "target record '" + r.id + "' has no subject");
    groups[r.lang][*r.subject].push_back(i);
  }
  std::vector<bool> keep(ds.records.size(), true);
  BiasResult out;
  for (const auto& [lang, subjects] : groups) {
    Rng rng(derive_seed(seed, fnv1a(lang)));
    for (const auto& [subject, rows] : subjects) {
      if (!rng.bernoulli(bucket_prob)) continue;
      out.bucketed.push_back(lang + "/" + subject);
      const auto retain = static_cast<std::size_t>(std::llround(retain_frac * static_cast<double>(rows.size())));
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < retain; ++i) std::swap(order[i], order[i + rng.index(order.size() - i)]);
      for (std::size_t r : rows) keep[r] = false;
      for (std::size_t i = 0; i < retain; ++i) keep[rows[order[i]]] = true;
    }
  }
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) out.kept_rows.push_back(i);
  for (std::size_t r : out.kept_rows) out.dataset.records.push_back(ds.records[r]);
  out.dataset.embeddings = ds.embeddings.select(out.kept_rows);
  return out;
}

// ---------------------------------------------------------------------------
// Drift streams

struct DriftPhase {
  std::string tag;
  std::vector<double> mixture;  // K entries, or K + 1 with a trailing noise bin
  std::size_t n_samples = 0;
};

struct DriftScript {
  std::vector<DriftPhase> phases;
  std::size_t increment = 500;
};

struct DriftStream {
  Dataset dataset;  // role = stream
  std::vector<std::string> phase;
  std::vector<int> source_cluster;  // cluster each point was drawn around, -1 for noise draws
  std::vector<std::size_t> boundaries;  // first index of each phase
};

// Cyclical preset: phase i concentrates extra mass on clusters {2i, 2i+1}
// (mod K); the final phase returns to the first phase's mixture.
inline DriftScript drift_preset(std::size_t k, std::size_t samples_per_phase = 2000, double focus_boost = 3.8,
                                std::size_t distinct_phases = 4) {
  require(k >= 2, Errc::invalid_argument, "preset needs K >= 2");
  DriftScript s;
  for (std::size_t i = 0; i <= distinct_phases; ++i) {
    const std::size_t p = i % distinct_phases;
    std::vector<double> mix(k, 1.0);
    mix[(2 * p) % k] += focus_boost;
    mix[(2 * p + 1) % k] += focus_boost;
    const double total = std::accumulate(mix.begin(), mix.end(), 0.0);
    for (double& v : mix) v /= total;
    s.phases.push_back({"T" + std::to_string(i + 1), std::move(mix), samples_per_phase});
  }
  return s;
}

inline DriftStream gen_drift_stream(const DriftScript& script, const ClusterModel& model, std::uint64_t seed,
                                    double spread = 0.05, const std::string& lang = "xx") {
  require(script.phases.size() >= 2, Errc::invalid_argument, "drift script needs at least two phases");
  require(model.k >= 1 && model.centroids.size() == model.k * model.dim, Errc::invalid_argument,
          "model has no centroids");
  const std::size_t d = model.dim;
  for (const auto& ph : script.phases) {
    require(ph.mixture.size() == model.k || ph.mixture.size() == model.k + 1, Errc::invalid_argument,
            "phase " + ph.tag + " mixture has " + std::to_string(ph.mixture.size()) + " entries for K=" +
                std::to_string(model.k));
    double total = 0.0;
    for (double v : ph.mixture) {
      require(v >= 0.0, Errc::invalid_argument, "negative mixture weight in phase " + ph.tag);
      total += v;
    }
    require(std::abs(total - 1.0) <= 1e-9, Errc::invalid_argument, "phase " + ph.tag + " mixture is not normalized");
  }
  Rng rng(derive_seed(seed, fnv1a("drift")));
  std::size_t n = 0;
  for (const auto& ph : script.phases) n += ph.n_samples;
  DriftStream out;
  std::vector<float> data(n * d);
  std::vector<double> scratch(d);
  std::size_t row = 0;
  for (const auto& ph : script.phases) {
    out.boundaries.push_back(row);
    for (std::size_t s = 0; s < ph.n_samples; ++s, ++row) {
      const std::size_t c = rng.categorical(ph.mixture);
      const std::span<float> dst(data.data() + row * d, d);
      if (c == model.k) {
        detail::random_unit(rng, scratch);
        normalize_into(scratch, dst);
        out.source_cluster.push_back(-1);
      } else {
        detail::perturb(rng, model.centroid(c), spread, scratch, dst);
        out.source_cluster.push_back(static_cast<int>(c));
      }
      out.phase.push_back(ph.tag);
      out.dataset.records.push_back({"s" + std::to_string(row), lang, Role::stream, std::nullopt, std::nullopt});
    }
  }
  out.dataset.embeddings = EmbeddingMatrix(d, n, std::move(data));
  return out;
}

}  // namespace compass::sim
