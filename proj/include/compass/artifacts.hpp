#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "compass/clustering/common.hpp"
#include "compass/core.hpp"
#include "compass/dataio.hpp"
#include "compass/mismatch.hpp"
#include "compass/monitor.hpp"
#include "compass/sampler.hpp"

namespace compass::io {

namespace detail {

// Non-finite doubles travel as the strings "inf", "-inf" and "nan".
inline json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double get_num(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw Error(Errc::parse_error, "expected a number, found \"" + s + "\"");
  }
  require(j.is_number(), Errc::parse_error, "expected a number");
  return j.get<double>();
}

inline json num_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> get_num_array(const json& j) {
  require(j.is_array(), Errc::parse_error, "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(get_num(x));
  return out;
}

inline json params_json(const std::map<std::string, double>& params) {
  json o = json::object();
  for (const auto& [k, v] : params) o[k] = num(v);
  return o;
}

inline std::map<std::string, double> get_params(const json& j) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) out[k] = get_num(v);
  return out;
}

inline ClusterMethod get_method(const json& j) {
  auto m = parse_method(j.get<std::string>());
  require(m.has_value(), Errc::parse_error, "unknown clustering method '" + j.get<std::string>() + "'");
  return *m;
}

inline json matrix_json(const EmbeddingMatrix& m) {
  return {{"dim", m.dim()}, {"count", m.count()}, {"f32le_base64", encode_f32_block(m.data())}};
}

inline EmbeddingMatrix get_matrix(const json& j) {
  auto data = decode_f32_block(j.at("f32le_base64").get<std::string>());
  return {j.at("dim").get<std::size_t>(), j.at("count").get<std::size_t>(), std::move(data)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-type encoders. Each returns the body; persist_artifact adds the envelope.

template <typename T>
struct ArtifactKind;

#define COMPASS_ARTIFACT_KIND(Type, name)          \
  template <>                                      \
  struct ArtifactKind<Type> {                      \
    static constexpr std::string_view value = name; \
  };

COMPASS_ARTIFACT_KIND(ClusterModel, "cluster_model")
COMPASS_ARTIFACT_KIND(Assignment, "assignment")
COMPASS_ARTIFACT_KIND(MismatchProfile, "mismatch_profile")
COMPASS_ARTIFACT_KIND(SamplingPlan, "sampling_plan")
COMPASS_ARTIFACT_KIND(Manifest, "manifest")
COMPASS_ARTIFACT_KIND(MonitorState, "monitor_state")
COMPASS_ARTIFACT_KIND(AnchorBuffer, "anchor_buffer")
COMPASS_ARTIFACT_KIND(TrainingRecipe, "training_recipe")
COMPASS_ARTIFACT_KIND(std::vector<clustering::QualityReport>, "quality_reports")
COMPASS_ARTIFACT_KIND(AdapterRegistry, "adapter_registry")
#undef COMPASS_ARTIFACT_KIND

inline void encode(json& j, const ClusterModel& m) {
  using namespace detail;
  j["method"] = std::string(to_string(m.method));
  j["k"] = m.k;
  j["dim"] = m.dim;
  j["centroids_f32le_base64"] = encode_f32_block(m.centroids);
  j["params"] = params_json(m.params);
  if (!m.hierarchy) {
    j["hierarchy"] = nullptr;
    return;
  }
  const auto& h = *m.hierarchy;
  json nodes = json::array();
  for (const auto& n : h.tree.nodes)
    nodes.push_back({{"parent", n.parent},
                     {"birth_lambda", num(n.birth_lambda)},
                     {"size", n.size},
                     {"stability", num(n.stability)},
                     {"selected", n.selected},
                     {"label", n.label}});
  j["hierarchy"] = {{"min_cluster_size", h.min_cluster_size},
                    {"min_samples", h.min_samples},
                    {"points", matrix_json(h.points)},
                    {"core_distances", num_array(h.core_distances)},
                    {"nodes", std::move(nodes)},
                    {"point_parent", h.tree.point_parent},
                    {"point_lambda", num_array(h.tree.point_lambda)}};
}

inline void decode(const json& j, ClusterModel& m) {
  using namespace detail;
  m.method = get_method(j.at("method"));
  m.k = j.at("k").get<std::size_t>();
  m.dim = j.at("dim").get<std::size_t>();
  m.centroids = decode_f32_block(j.at("centroids_f32le_base64").get<std::string>());
  require(m.centroids.size() == m.k * m.dim, Errc::parse_error, "centroid block does not match k*dim");
  m.params = get_params(j.at("params"));
  m.hierarchy.reset();
  const auto& hj = j.at("hierarchy");
  if (hj.is_null()) return;
  DensityHierarchy h;
  h.min_cluster_size = hj.at("min_cluster_size").get<std::size_t>();
  h.min_samples = hj.at("min_samples").get<std::size_t>();
  h.points = get_matrix(hj.at("points"));
  h.core_distances = get_num_array(hj.at("core_distances"));
  for (const auto& n : hj.at("nodes"))
    h.tree.nodes.push_back({n.at("parent").get<int>(), get_num(n.at("birth_lambda")), n.at("size").get<std::size_t>(),
                            get_num(n.at("stability")), n.at("selected").get<bool>(), n.at("label").get<int>()});
  h.tree.point_parent = hj.at("point_parent").get<std::vector<int>>();
  h.tree.point_lambda = get_num_array(hj.at("point_lambda"));
  require(h.core_distances.size() == h.points.count() && h.tree.point_parent.size() == h.points.count() &&
              h.tree.point_lambda.size() == h.points.count(),
          Errc::parse_error, "hierarchy arrays do not match point count");
  m.hierarchy = std::move(h);
}

inline void encode(json& j, const Assignment& a) {
  j["method"] = std::string(to_string(a.method));
  j["k"] = a.k;
  j["labels"] = a.labels;
}

inline void decode(const json& j, Assignment& a) {
  a.method = detail::get_method(j.at("method"));
  a.k = j.at("k").get<std::size_t>();
  a.labels = j.at("labels").get<std::vector<int>>();
}

inline void encode(json& j, const MismatchProfile& p) {
  using namespace detail;
  j["epsilon"] = num(p.epsilon);
  j["no_eval_signal"] = p.no_eval_signal;
  j["noise"] = {{"target", p.noise_target}, {"aux", p.noise_aux}, {"eval", p.noise_eval}};
  json clusters = json::array();
  for (const auto& c : p.clusters)
    clusters.push_back({{"n_t", c.n_t},
                        {"n_aux", c.n_aux},
                        {"n_eval", c.n_eval},
                        {"rho", num(c.rho)},
                        {"w", num(c.w)},
                        {"w_norm", num(c.w_norm)}});
  j["clusters"] = std::move(clusters);
}

inline void decode(const json& j, MismatchProfile& p) {
  using namespace detail;
  p.epsilon = get_num(j.at("epsilon"));
  p.no_eval_signal = j.at("no_eval_signal").get<bool>();
  const auto& noise = j.at("noise");
  p.noise_target = noise.at("target").get<std::size_t>();
  p.noise_aux = noise.at("aux").get<std::size_t>();
  p.noise_eval = noise.at("eval").get<std::size_t>();
  p.clusters.clear();
  for (const auto& c : j.at("clusters"))
    p.clusters.push_back({c.at("n_t").get<std::size_t>(), c.at("n_aux").get<std::size_t>(),
                          c.at("n_eval").get<std::size_t>(), get_num(c.at("rho")), get_num(c.at("w")),
                          get_num(c.at("w_norm"))});
}

inline void encode(json& j, const SamplingPlan& p) {
  using namespace detail;
  j["budget"] = num(p.budget);
  j["target_size"] = p.target_size;
  j["seed"] = p.seed;
  j["tau_sim"] = num(p.tau_sim);
  j["delta"] = num(p.delta);
  j["replacement_mode"] = p.replacement_mode;
  j["quotas"] = p.quotas;
  j["underfilled"] = p.underfilled;
  j["shortfall"] = p.shortfall;
  json sel = json::array();
  for (const auto& s : p.selections)
    sel.push_back({{"id", s.id},
                   {"cluster", s.cluster},
                   {"alpha", num(s.alpha)},
                   {"score", num(s.score)},
                   {"weight", num(s.weight)},
                   {"pick_count", s.pick_count}});
  j["selections"] = std::move(sel);
}

inline void decode(const json& j, SamplingPlan& p) {
  using namespace detail;
  p.budget = get_num(j.at("budget"));
  p.target_size = j.at("target_size").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.tau_sim = get_num(j.at("tau_sim"));
  p.delta = get_num(j.at("delta"));
  p.replacement_mode = j.at("replacement_mode").get<bool>();
  p.quotas = j.at("quotas").get<std::vector<std::size_t>>();
  p.underfilled = j.at("underfilled").get<bool>();
  p.shortfall = j.at("shortfall").get<std::vector<std::size_t>>();
  p.selections.clear();
  for (const auto& s : j.at("selections"))
    p.selections.push_back({s.at("id").get<std::string>(), s.at("cluster").get<std::size_t>(), get_num(s.at("alpha")),
                            get_num(s.at("score")), get_num(s.at("weight")), s.at("pick_count").get<std::size_t>()});
}

inline void encode(json& j, const Manifest& m) {
  j["target_ids"] = m.target_ids;
  j["selected_ids"] = m.selected_ids;
}

inline void decode(const json& j, Manifest& m) {
  m.target_ids = j.at("target_ids").get<std::vector<std::string>>();
  m.selected_ids = j.at("selected_ids").get<std::vector<std::string>>();
}

inline void encode(json& j, const MonitorState& s) {
  using namespace detail;
  j["n_clusters"] = s.n_clusters;
  j["p_ref"] = num_array(s.p_ref);
  json window = json::array();
  for (const auto& e : s.window) window.push_back(json::array({json(e.id), json(e.cluster)}));
  j["window"] = std::move(window);
  j["window_capacity"] = s.window_capacity;
  j["theta_js"] = num(s.theta_js);
  j["eta"] = num(s.eta);
  j["observed"] = s.observed;
  json hist = json::array();
  for (const auto& h : s.js_history) hist.push_back({{"index", h.index}, {"js", num(h.js)}});
  j["js_history"] = std::move(hist);
  json trig = json::array();
  for (const auto& t : s.triggers) trig.push_back({{"index", t.index}, {"js", num(t.js)}, {"theta", num(t.theta)}});
  j["triggers"] = std::move(trig);
}

inline void decode(const json& j, MonitorState& s) {
  using namespace detail;
  s.n_clusters = j.at("n_clusters").get<std::size_t>();
  s.p_ref = get_num_array(j.at("p_ref"));
  require(s.p_ref.size() == s.n_clusters + 1, Errc::parse_error, "p_ref must have K + 1 bins");
  s.window.clear();
  for (const auto& e : j.at("window")) s.window.push_back({e.at(0).get<std::string>(), e.at(1).get<int>()});
  s.window_capacity = j.at("window_capacity").get<std::size_t>();
  s.theta_js = get_num(j.at("theta_js"));
  s.eta = get_num(j.at("eta"));
  s.observed = j.at("observed").get<std::size_t>();
  s.js_history.clear();
  for (const auto& h : j.at("js_history")) s.js_history.push_back({h.at("index").get<std::size_t>(), get_num(h.at("js"))});
  s.triggers.clear();
  for (const auto& t : j.at("triggers"))
    s.triggers.push_back({t.at("index").get<std::size_t>(), get_num(t.at("js")), get_num(t.at("theta"))});
}

inline void encode(json& j, const AnchorBuffer& b) {
  using namespace detail;
  j["fraction"] = num(b.fraction);
  j["training_size"] = b.training_size;
  json anchors = json::array();
  for (const auto& a : b.anchors)
    anchors.push_back({{"id", a.id}, {"cluster", a.cluster}, {"distance", num(a.distance)}});
  j["anchors"] = std::move(anchors);
}

inline void decode(const json& j, AnchorBuffer& b) {
  using namespace detail;
  b.fraction = get_num(j.at("fraction"));
  b.training_size = j.at("training_size").get<std::size_t>();
  b.anchors.clear();
  for (const auto& a : j.at("anchors"))
    b.anchors.push_back({a.at("id").get<std::string>(), a.at("cluster").get<std::size_t>(), get_num(a.at("distance"))});
}

inline void encode(json& j, const TrainingRecipe& r) {
  using namespace detail;
  j["manifest"] = r.manifest;
  j["anchor_ids"] = r.anchor_ids;
  j["lambda"] = num(r.lambda);
  j["beta"] = num(r.beta);
  j["loss"] = r.loss;
  j["epochs"] = r.epochs;
}

inline void decode(const json& j, TrainingRecipe& r) {
  using namespace detail;
  r.manifest = j.at("manifest").get<std::string>();
  r.anchor_ids = j.at("anchor_ids").get<std::vector<std::string>>();
  r.lambda = get_num(j.at("lambda"));
  r.beta = get_num(j.at("beta"));
  r.loss = j.at("loss").get<std::string>();
  r.epochs = j.at("epochs").get<std::size_t>();
  require(r.lambda >= 0.0 && r.beta >= 0.0, Errc::parse_error, "recipe lambda and beta must be >= 0");
}

inline void encode(json& j, const std::vector<clustering::QualityReport>& reports) {
  using namespace detail;
  json arr = json::array();
  for (const auto& r : reports)
    arr.push_back({{"method", std::string(to_string(r.method))},
                   {"params", params_json(r.params)},
                   {"silhouette", r.silhouette ? num(*r.silhouette) : json(nullptr)},
                   {"dbcv", r.dbcv ? num(*r.dbcv) : json(nullptr)},
                   {"n_clusters", r.n_clusters},
                   {"noise_fraction", num(r.noise_fraction)}});
  j["reports"] = std::move(arr);
}

inline void decode(const json& j, std::vector<clustering::QualityReport>& reports) {
  using namespace detail;
  reports.clear();
  for (const auto& r : j.at("reports")) {
    clustering::QualityReport q;
    q.method = get_method(r.at("method"));
    q.params = get_params(r.at("params"));
    if (!r.at("silhouette").is_null()) q.silhouette = get_num(r.at("silhouette"));
    if (!r.at("dbcv").is_null()) q.dbcv = get_num(r.at("dbcv"));
    q.n_clusters = r.at("n_clusters").get<std::size_t>();
    q.noise_fraction = get_num(r.at("noise_fraction"));
    reports.push_back(std::move(q));
  }
}

inline void encode(json& j, const AdapterRegistry& r) {
  j["entries"] = r.entries;
  j["target_only"] = r.target_only;
  j["base_model"] = r.base_model ? json(*r.base_model) : json(nullptr);
}

inline void decode(const json& j, AdapterRegistry& r) {
  r.entries = j.value("entries", std::map<std::string, std::string>{});
  r.target_only = j.value("target_only", std::map<std::string, std::string>{});
  r.base_model.reset();
  if (j.contains("base_model") && !j["base_model"].is_null()) r.base_model = j["base_model"].get<std::string>();
}

// ---------------------------------------------------------------------------

template <typename T>
std::string persist_artifact(const T& x) {
  json j = envelope(ArtifactKind<T>::value);
  encode(j, x);
  return dump(j);
}

template <typename T>
T load_artifact(std::string_view text) {
  const json j = parse_json(text);
  check_envelope(j, ArtifactKind<T>::value);
  T out{};
  try {
    decode(j, out);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string(ArtifactKind<T>::value) + ": " + e.what());
  }
  return out;
}

template <typename T>
void save_artifact(const std::filesystem::path& path, const T& x) {
  write_file(path, persist_artifact(x));
}

template <typename T>
T load_artifact_file(const std::filesystem::path& path) {
  try {
    return load_artifact<T>(read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io_failure) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

// One audit-log line per trigger check.
inline std::string audit_line(const JsSample& sample, double theta, bool fired) {
  return json{{"index", sample.index}, {"js", detail::num(sample.js)}, {"theta", detail::num(theta)}, {"fired", fired}}
             .dump() +
         '\n';
}

}  // namespace compass::io
