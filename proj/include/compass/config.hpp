#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "compass/clustering/butina.hpp"
#include "compass/clustering/common.hpp"
#include "compass/clustering/density.hpp"
#include "compass/dataio.hpp"

namespace compass {

struct RunConfig {
  // paths
  std::string records;
  std::string embeddings;
  std::string out_dir = "out";
  std::string stream_records;
  std::string stream_embeddings;
  std::string lang_detect;  // external command: text on stdin, tag on stdout

  // clustering
  std::string method = "kmeans";
  clustering::KRange kmeans_k{10, 120, 5};
  std::size_t seeds_per_k = 10;
  clustering::KRange agglomerative_k{80, 120, 1};
  std::vector<std::size_t> min_cluster_sizes{5, 10, 15, 20};
  std::vector<std::size_t> min_samples{1, 5, 10};
  double butina_t_min = 0.70;
  double butina_t_max = 0.95;
  double butina_coverage = 0.95;

  // mismatch and sampling
  double epsilon = 1.0;
  double budget = 0.8;
  double tau_sim = 0.90;
  double delta = 0.20;
  bool replacement_mode = false;

  // monitoring and continual updates
  double theta_js = 0.15;
  std::size_t window = 1000;
  std::size_t increment = 500;
  double eta = 0.1;
  double anchor_fraction = 0.05;
  double lambda = 2.0;
  double beta = 0.1;
  std::size_t epochs = 5;

  std::uint64_t seed = 0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Returns a description of the first out-of-domain tunable, or empty.
inline std::string config_problem(const RunConfig& c) {
  if (!parse_method(c.method)) return "method must be kmeans, agglomerative, density or butina";
  if (c.kmeans_k.values().empty()) return "kmeans k range is empty";
  if (c.seeds_per_k < 1) return "seeds_per_k must be >= 1";
  if (c.agglomerative_k.values().empty()) return "agglomerative k range is empty";
  if (c.min_cluster_sizes.empty() || c.min_samples.empty()) return "density grid is empty";
  for (auto v : c.min_cluster_sizes)
    if (v < 2) return "min_cluster_size values must be >= 2";
  for (auto v : c.min_samples)
    if (v < 1) return "min_samples values must be >= 1";
  if (!(0.0 < c.butina_t_min && c.butina_t_min < c.butina_t_max && c.butina_t_max < 1.0))
    return "butina thresholds must satisfy 0 < t_min < t_max < 1";
  if (!(c.butina_coverage > 0.0 && c.butina_coverage <= 1.0)) return "butina coverage must be in (0, 1]";
  if (!(c.epsilon > 0.0)) return "epsilon must be > 0";
  if (!(c.budget > 0.0)) return "budget must be > 0";
  if (!(c.tau_sim >= -1.0 && c.tau_sim <= 1.0)) return "tau_sim must be in [-1, 1]";
  if (!(c.delta >= 0.0)) return "delta must be >= 0";
  if (!(c.theta_js > 0.0 && c.theta_js < 1.0)) return "theta_js must be in (0, 1)";
  if (c.window < 1) return "window must be >= 1";
  if (c.increment < 1) return "increment must be >= 1";
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) return "eta must be in [0, 1]";
  if (!(c.anchor_fraction >= 0.0 && c.anchor_fraction <= 1.0)) return "anchor_fraction must be in [0, 1]";
  if (!(c.lambda >= 0.0)) return "lambda must be >= 0";
  if (!(c.beta >= 0.0)) return "beta must be >= 0";
  if (c.epochs < 1) return "epochs must be >= 1";
  return {};
}

inline void validate_config(const RunConfig& c) {
  const auto problem = config_problem(c);
  require(problem.empty(), Errc::invalid_argument, "config: " + problem);
}

namespace io {

inline json krange_json(const clustering::KRange& r) { return {{"min", r.min}, {"max", r.max}, {"step", r.step}}; }

inline clustering::KRange get_krange(const json& j) {
  return {j.at("min").get<std::size_t>(), j.at("max").get<std::size_t>(), j.at("step").get<std::size_t>()};
}

inline std::string persist_config(const RunConfig& c) {
  json j = envelope("run_config");
  j["paths"] = {{"records", c.records},
                {"embeddings", c.embeddings},
                {"out_dir", c.out_dir},
                {"stream_records", c.stream_records},
                {"stream_embeddings", c.stream_embeddings},
                {"lang_detect", c.lang_detect}};
  j["clustering"] = {{"method", c.method},
                     {"kmeans_k", krange_json(c.kmeans_k)},
                     {"seeds_per_k", c.seeds_per_k},
                     {"agglomerative_k", krange_json(c.agglomerative_k)},
                     {"min_cluster_sizes", c.min_cluster_sizes},
                     {"min_samples", c.min_samples},
                     {"butina_t_min", c.butina_t_min},
                     {"butina_t_max", c.butina_t_max},
                     {"butina_coverage", c.butina_coverage}};
  j["sampling"] = {{"epsilon", c.epsilon},
                   {"budget", c.budget},
                   {"tau_sim", c.tau_sim},
                   {"delta", c.delta},
                   {"replacement_mode", c.replacement_mode}};
  j["monitor"] = {{"theta_js", c.theta_js},
                  {"window", c.window},
                  {"increment", c.increment},
                  {"eta", c.eta},
                  {"anchor_fraction", c.anchor_fraction},
                  {"lambda", c.lambda},
                  {"beta", c.beta},
                  {"epochs", c.epochs}};
  j["seed"] = c.seed;
  return dump(j);
}

// Missing sections or keys keep their defaults; unknown keys are rejected so
// typos do not pass silently.
inline RunConfig load_config(std::string_view text) {
  const json j = parse_json(text);
  check_envelope(j, "run_config");
  RunConfig c;
  auto check_keys = [](const json& section, std::string_view name, std::initializer_list<std::string_view> known) {
    require(section.is_object(), Errc::parse_error, "config section '" + std::string(name) + "' must be an object");
    for (const auto& [k, v] : section.items()) {
      bool ok = false;
      for (auto key : known) ok = ok || key == k;
      require(ok, Errc::parse_error, "unknown config key '" + std::string(name) + "." + k + "'");
    }
  };
  try {
    for (const auto& [k, v] : j.items())
      require(k == "kind" || k == "schema_version" || k == "paths" || k == "clustering" || k == "sampling" ||
                  k == "monitor" || k == "seed",
              Errc::parse_error, "unknown config key '" + k + "'");
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, "paths", {"records", "embeddings", "out_dir", "stream_records", "stream_embeddings", "lang_detect"});
      c.records = p.value("records", c.records);
      c.embeddings = p.value("embeddings", c.embeddings);
      c.out_dir = p.value("out_dir", c.out_dir);
      c.stream_records = p.value("stream_records", c.stream_records);
      c.stream_embeddings = p.value("stream_embeddings", c.stream_embeddings);
      c.lang_detect = p.value("lang_detect", c.lang_detect);
    }
    if (j.contains("clustering")) {
      const auto& s = j["clustering"];
      check_keys(s, "clustering",
                 {"method", "kmeans_k", "seeds_per_k", "agglomerative_k", "min_cluster_sizes", "min_samples",
                  "butina_t_min", "butina_t_max", "butina_coverage"});
      c.method = s.value("method", c.method);
      if (s.contains("kmeans_k")) c.kmeans_k = get_krange(s["kmeans_k"]);
      c.seeds_per_k = s.value("seeds_per_k", c.seeds_per_k);
      if (s.contains("agglomerative_k")) c.agglomerative_k = get_krange(s["agglomerative_k"]);
      c.min_cluster_sizes = s.value("min_cluster_sizes", c.min_cluster_sizes);
      c.min_samples = s.value("min_samples", c.min_samples);
      c.butina_t_min = s.value("butina_t_min", c.butina_t_min);
      c.butina_t_max = s.value("butina_t_max", c.butina_t_max);
      c.butina_coverage = s.value("butina_coverage", c.butina_coverage);
    }
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      check_keys(s, "sampling", {"epsilon", "budget", "tau_sim", "delta", "replacement_mode"});
      c.epsilon = s.value("epsilon", c.epsilon);
      c.budget = s.value("budget", c.budget);
      c.tau_sim = s.value("tau_sim", c.tau_sim);
      c.delta = s.value("delta", c.delta);
      c.replacement_mode = s.value("replacement_mode", c.replacement_mode);
    }
    if (j.contains("monitor")) {
      const auto& s = j["monitor"];
      check_keys(s, "monitor",
                 {"theta_js", "window", "increment", "eta", "anchor_fraction", "lambda", "beta", "epochs"});
      c.theta_js = s.value("theta_js", c.theta_js);
      c.window = s.value("window", c.window);
      c.increment = s.value("increment", c.increment);
      c.eta = s.value("eta", c.eta);
      c.anchor_fraction = s.value("anchor_fraction", c.anchor_fraction);
      c.lambda = s.value("lambda", c.lambda);
      c.beta = s.value("beta", c.beta);
      c.epochs = s.value("epochs", c.epochs);
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

}  // namespace io

// COMPASS_SEED, when set to a decimal integer, overrides the configured seed.
inline void apply_seed_env(RunConfig& c) {
  const char* env = std::getenv("COMPASS_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  require(end && *end == '\0', Errc::invalid_argument, std::string("COMPASS_SEED is not an integer: ") + env);
  c.seed = v;
}

}  // namespace compass
