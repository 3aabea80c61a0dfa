// compass: stage-per-subcommand frontend for cluster-guided data selection.
//
// Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 drift trigger fired.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "compass/compass.hpp"

namespace {

namespace fs = std::filesystem;
using namespace compass;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitFired = 3;

constexpr const char* kPublished = "published value";
constexpr const char* kChosen = "chosen default";

struct Paths {
  std::string model, assignment, reports, profile, plan, manifest, state, audit, anchors, recipe;
  std::string out_records, out_embeddings;
  std::string previous_manifest, registry, updated_model;
};

fs::path resolve(const std::string& given, const RunConfig& cfg, const char* name) {
  return given.empty() ? fs::path(cfg.out_dir) / name : fs::path(given);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <typename T>
void save(const fs::path& p, const T& x) {
  ensure_parent(p);
  io::save_artifact(p, x);
}

void save_text(const fs::path& p, std::string_view text) {
  ensure_parent(p);
  io::write_file(p, text);
}

Dataset load_checked(const RunConfig& cfg) {
  require(!cfg.records.empty(), Errc::invalid_argument, "--records is required");
  require(!cfg.embeddings.empty(), Errc::invalid_argument, "--embeddings is required");
  require(fs::exists(cfg.records), Errc::io_failure, "records file not found: " + cfg.records);
  require(fs::exists(cfg.embeddings), Errc::io_failure, "embeddings file not found: " + cfg.embeddings);
  Dataset ds = io::load_dataset(cfg.records, cfg.embeddings);
  const auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << violations.size() << " dataset violation(s)";
    for (const auto& v : violations) {
      msg << "\n  " << v.kind;
      if (!v.rows.empty()) {
        msg << " rows";
        for (auto r : v.rows) msg << ' ' << r;
      }
      msg << ": " << v.detail;
    }
    throw Error(Errc::invalid_argument, msg.str());
  }
  return ds;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty(), Errc::invalid_argument, "not a number list: " + text);
    out.push_back(v);
  }
  return out;
}

// ---------------------------------------------------------------------------

clustering::FitResult fit(const EmbeddingMatrix& x, const RunConfig& cfg) {
  switch (*parse_method(cfg.method)) {
    case ClusterMethod::kmeans: return clustering::fit_kmeans(x, cfg.kmeans_k, cfg.seeds_per_k, cfg.seed);
    case ClusterMethod::agglomerative: return clustering::fit_agglomerative(x, cfg.agglomerative_k);
    case ClusterMethod::density: return clustering::fit_density(x, {cfg.min_cluster_sizes, cfg.min_samples});
    case ClusterMethod::butina:
      return clustering::fit_taylor_butina(x, {cfg.butina_t_min, cfg.butina_t_max, cfg.butina_coverage});
  }
  throw Error(Errc::invalid_argument, "unknown method");
}

// Fits on every non-stream record; stream records are assigned transductively.
clustering::FitResult cluster_dataset(const Dataset& ds, const RunConfig& cfg) {
  std::vector<std::size_t> fit_rows, stream_rows;
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    (ds.records[i].role == Role::stream ? stream_rows : fit_rows).push_back(i);
  require(!fit_rows.empty(), Errc::invalid_argument, "no non-stream records to cluster");
  if (stream_rows.empty()) return fit(ds.embeddings, cfg);
  auto result = fit(ds.embeddings.select(fit_rows), cfg);
  const auto streamed = clustering::assign(ds.embeddings.select(stream_rows), result.model);
  std::vector<int> labels(ds.records.size());
  for (std::size_t i = 0; i < fit_rows.size(); ++i) labels[fit_rows[i]] = result.assignment.labels[i];
  for (std::size_t i = 0; i < stream_rows.size(); ++i) labels[stream_rows[i]] = streamed.labels[i];
  result.assignment.labels = std::move(labels);
  return result;
}

MismatchProfile profile_for(const Dataset& ds, const Assignment& asn, const std::string& coldstart,
                            const RunConfig& cfg) {
  if (coldstart.empty() || coldstart == "none") return mismatch_profile(tabulate_counts(ds, asn), cfg.epsilon);
  ColdStartMode mode;
  if (coldstart == "self") {
    mode = ColdStartMode::self();
  } else if (coldstart.rfind("borrow:", 0) == 0 && coldstart.size() > 7) {
    mode = ColdStartMode::borrow(coldstart.substr(7));
  } else {
    throw Error(Errc::invalid_argument, "--coldstart must be none, self or borrow:<lang>");
  }
  const auto proxy = coldstart_proxy(ds, mode);
  Assignment proxied{{}, asn.method, asn.k};
  for (std::size_t r : proxy.origin) proxied.labels.push_back(asn.labels.at(r));
  return mismatch_profile(tabulate_counts(proxy.dataset, proxied), cfg.epsilon);
}

void warn_underfilled(const SamplingPlan& plan) {
  if (!plan.underfilled) return;
  for (std::size_t k = 0; k < plan.shortfall.size(); ++k)
    if (plan.shortfall[k] > 0)
      std::cerr << "warning: underfilled cluster " << k << ": quota " << plan.quotas[k] << ", shortfall "
                << plan.shortfall[k] << '\n';
}

double js_or_zero(const std::vector<double>& counts_a, const std::vector<double>& counts_b) {
  double sa = 0.0, sb = 0.0;
  for (double v : counts_a) sa += v;
  for (double v : counts_b) sb += v;
  if (!(sa > 0.0) || !(sb > 0.0)) return 0.0;
  std::vector<double> p(counts_a.size()), q(counts_b.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = counts_a[i] / sa;
    q[i] = counts_b[i] / sb;
  }
  return js_divergence(p, q);
}

void print_summary(std::ostream& out, const MismatchProfile& profile, const SamplingPlan& plan) {
  const std::size_t k = profile.clusters.size();
  std::vector<double> selected(k, 0.0), before(k), after(k), eval(k);
  for (const auto& s : plan.selections) selected[s.cluster] += 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    before[c] = static_cast<double>(profile.clusters[c].n_t);
    after[c] = before[c] + selected[c];
    eval[c] = static_cast<double>(profile.clusters[c].n_eval);
  }
  out << std::left << std::setw(8) << "cluster" << std::right << std::setw(8) << "n_t" << std::setw(8) << "n_aux"
      << std::setw(8) << "n_eval" << std::setw(10) << "w_norm" << std::setw(8) << "quota" << std::setw(9)
      << "selected" << std::setw(8) << "fill" << '\n';
  out << std::fixed;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& m = profile.clusters[c];
    const double fill = plan.quotas[c] > 0 ? selected[c] / static_cast<double>(plan.quotas[c]) : 1.0;
    out << std::left << std::setw(8) << c << std::right << std::setw(8) << m.n_t << std::setw(8) << m.n_aux
        << std::setw(8) << m.n_eval << std::setw(10) << std::setprecision(4) << m.w_norm << std::setw(8)
        << plan.quotas[c] << std::setw(9) << static_cast<std::size_t>(selected[c]) << std::setw(8)
        << std::setprecision(3) << fill << '\n';
  }
  out << std::setprecision(6) << "clusters " << k << ", selections " << plan.selections.size() << ", target "
      << plan.target_size << '\n';
  out << "JS(train || eval) before " << js_or_zero(before, eval) << " after " << js_or_zero(after, eval) << '\n';
  out.unsetf(std::ios::floatfield);
}

std::string detect_language(const std::string& command, const std::string& text) {
  const fs::path tmp = fs::temp_directory_path() / ("compass-detect-" + std::to_string(fnv1a(text)) + ".txt");
  io::write_file(tmp, text);
  const std::string cmd = command + " < '" + tmp.string() + "'";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe) {
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  }
  const int status = pipe ? ::pclose(pipe) : -1;
  std::error_code ec;
  fs::remove(tmp, ec);
  fs::remove(tmp.string() + ".lock", ec);
  require(status == 0, Errc::io_failure, "language detector failed: " + command);
  const auto b = out.find_first_not_of(" \t\r\n");
  const auto e = out.find_last_not_of(" \t\r\n");
  require(b != std::string::npos, Errc::io_failure, "language detector printed no tag");
  return out.substr(b, e - b + 1);
}

std::vector<std::string> manifest_ids(const Manifest& m) {
  std::vector<std::string> ids = m.target_ids;
  std::set<std::string> seen(ids.begin(), ids.end());
  for (const auto& id : m.selected_ids)
    if (seen.insert(id).second) ids.push_back(id);
  return ids;
}

// ---------------------------------------------------------------------------

struct Cli {
  RunConfig cfg;
  Paths paths;
  std::string config_path;
  std::string coldstart = "none";
  bool rebuild_on_fire = false;
  bool has_target_data = false;
  std::string route_lang;

  // gen
  sim::BlobSpec blobs;
  std::string blob_role = "aux";
  sim::MixtureFixtureSpec fixture;
  std::string target_mix = "0.40,0.30,0.15,0.10,0.05";
  std::string eval_mix = "0.10,0.15,0.20,0.25,0.30";
  std::string aux_mix = "0.2,0.2,0.2,0.2,0.2";
  std::size_t samples_per_phase = 2000;
  double focus_boost = 3.8;
  double drift_spread = 0.05;
  double bucket_prob = 0.2;
  double retain_frac = 0.5;
};

int run_gen_blobs(Cli& c) {
  auto role = parse_role(c.blob_role);
  require(role.has_value(), Errc::invalid_argument, "unknown role '" + c.blob_role + "'");
  c.blobs.role = *role;
  c.blobs.seed = c.cfg.seed;
  const auto b = sim::gen_blobs(c.blobs);
  const auto recs = resolve(c.paths.out_records, c.cfg, "records.jsonl");
  const auto emb = resolve(c.paths.out_embeddings, c.cfg, "embeddings.bin");
  ensure_parent(recs);
  ensure_parent(emb);
  io::save_records(recs, b.dataset.records);
  io::save_embeddings(emb, b.dataset.embeddings);
  std::cout << "wrote " << b.dataset.records.size() << " records to " << recs.string() << '\n';
  return kExitOk;
}

int run_gen_fixture(Cli& c) {
  c.fixture.target_mix = parse_list(c.target_mix);
  c.fixture.eval_mix = parse_list(c.eval_mix);
  c.fixture.aux_mix = parse_list(c.aux_mix);
  c.fixture.seed = c.cfg.seed;
  const auto f = sim::gen_mixture_fixture(c.fixture);
  const auto recs = resolve(c.paths.out_records, c.cfg, "records.jsonl");
  const auto emb = resolve(c.paths.out_embeddings, c.cfg, "embeddings.bin");
  ensure_parent(recs);
  ensure_parent(emb);
  io::save_records(recs, f.dataset.records);
  io::save_embeddings(emb, f.dataset.embeddings);
  std::cout << "wrote " << f.dataset.records.size() << " records to " << recs.string() << '\n';
  return kExitOk;
}

int run_gen_drift(Cli& c) {
  const auto model = io::load_artifact_file<ClusterModel>(resolve(c.paths.model, c.cfg, "model.json"));
  auto script = sim::drift_preset(model.k, c.samples_per_phase, c.focus_boost);
  script.increment = c.cfg.increment;
  auto stream = sim::gen_drift_stream(script, model, c.cfg.seed, c.drift_spread, c.fixture.lang);
  for (std::size_t i = 0; i < stream.dataset.records.size(); ++i) stream.dataset.records[i].subject = stream.phase[i];
  const auto recs = resolve(c.paths.out_records, c.cfg, "stream.jsonl");
  const auto emb = resolve(c.paths.out_embeddings, c.cfg, "stream.bin");
  ensure_parent(recs);
  ensure_parent(emb);
  io::save_records(recs, stream.dataset.records);
  io::save_embeddings(emb, stream.dataset.embeddings);
  std::cout << "wrote " << stream.dataset.records.size() << " stream records in " << script.phases.size()
            << " phases to " << recs.string() << '\n';
  return kExitOk;
}

int run_gen_bias(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto result = sim::bias_simulate(ds, c.bucket_prob, c.retain_frac, c.cfg.seed);
  const auto recs = resolve(c.paths.out_records, c.cfg, "biased.jsonl");
  const auto emb = resolve(c.paths.out_embeddings, c.cfg, "biased.bin");
  ensure_parent(recs);
  ensure_parent(emb);
  io::save_records(recs, result.dataset.records);
  io::save_embeddings(emb, result.dataset.embeddings);
  std::cout << "kept " << result.dataset.records.size() << " of " << ds.records.size() << " records; bucketed "
            << result.bucketed.size() << " subject(s)\n";
  for (const auto& s : result.bucketed) std::cout << "  " << s << '\n';
  return kExitOk;
}

int run_ingest(Cli& c) {
  require(!c.cfg.records.empty() && !c.cfg.embeddings.empty(), Errc::invalid_argument,
          "--records and --embeddings are required");
  require(fs::exists(c.cfg.records), Errc::io_failure, "records file not found: " + c.cfg.records);
  auto records = io::load_records(c.cfg.records);
  std::size_t detected = 0;
  for (auto& r : records) {
    if (!r.lang.empty()) continue;
    require(!c.cfg.lang_detect.empty(), Errc::invalid_argument,
            "record '" + r.id + "' has no lang and no --lang-detect command is configured");
    require(r.text.has_value(), Errc::invalid_argument, "record '" + r.id + "' has neither lang nor text");
    r.lang = detect_language(c.cfg.lang_detect, *r.text);
    ++detected;
  }
  require(fs::exists(c.cfg.embeddings), Errc::io_failure, "embeddings file not found: " + c.cfg.embeddings);
  Dataset ds{std::move(records), io::load_embeddings(c.cfg.embeddings)};
  const auto violations = validate_dataset(ds);
  for (const auto& v : violations) {
    std::cerr << "violation " << v.kind;
    for (auto r : v.rows) std::cerr << ' ' << r;
    std::cerr << ": " << v.detail << '\n';
  }
  if (!violations.empty()) return kExitInput;
  const auto recs = resolve(c.paths.out_records, c.cfg, "records.jsonl");
  const auto emb = resolve(c.paths.out_embeddings, c.cfg, "embeddings.bin");
  ensure_parent(recs);
  ensure_parent(emb);
  io::save_records(recs, ds.records);
  io::save_embeddings(emb, ds.embeddings);
  std::cout << "ingested " << ds.records.size() << " records (dim " << ds.embeddings.dim() << "), " << detected
            << " language tag(s) detected\n";
  return kExitOk;
}

int run_cluster(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto result = cluster_dataset(ds, c.cfg);
  save(resolve(c.paths.model, c.cfg, "model.json"), result.model);
  save(resolve(c.paths.assignment, c.cfg, "assignment.json"), result.assignment);
  save(resolve(c.paths.reports, c.cfg, "reports.json"), result.reports);
  std::cout << "method " << to_string(result.model.method) << ", K=" << result.model.k << ", noise fraction "
            << clustering::noise_fraction(result.assignment.labels) << '\n';
  return kExitOk;
}

int run_mismatch(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto asn = io::load_artifact_file<Assignment>(resolve(c.paths.assignment, c.cfg, "assignment.json"));
  const auto profile = profile_for(ds, asn, c.coldstart, c.cfg);
  save(resolve(c.paths.profile, c.cfg, "profile.json"), profile);
  if (profile.no_eval_signal) std::cerr << "warning: no-eval-signal: every cluster weight is zero\n";
  std::cout << profile.clusters.size() << " clusters profiled\n";
  return kExitOk;
}

int run_sample(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto model = io::load_artifact_file<ClusterModel>(resolve(c.paths.model, c.cfg, "model.json"));
  const auto asn = io::load_artifact_file<Assignment>(resolve(c.paths.assignment, c.cfg, "assignment.json"));
  const auto profile = io::load_artifact_file<MismatchProfile>(resolve(c.paths.profile, c.cfg, "profile.json"));
  const SamplingConfig sc{c.cfg.budget, c.cfg.tau_sim, c.cfg.delta, c.cfg.seed, c.cfg.replacement_mode};
  const auto plan = run_sampling(ds, asn, profile, model, sc);
  save(resolve(c.paths.plan, c.cfg, "plan.json"), plan);
  save(resolve(c.paths.manifest, c.cfg, "manifest.json"), make_manifest(ds, plan));
  warn_underfilled(plan);
  std::cout << plan.selections.size() << " selections\n";
  return kExitOk;
}

int run_monitor(Cli& c) {
  const auto model = io::load_artifact_file<ClusterModel>(resolve(c.paths.model, c.cfg, "model.json"));
  const auto state_in = resolve(c.paths.state, c.cfg, "monitor_state.json");
  MonitorState state;
  if (!c.paths.state.empty() && fs::exists(state_in)) {
    state = io::load_artifact_file<MonitorState>(state_in);
    require(state.n_clusters == model.k, Errc::invalid_argument, "monitor state and model disagree on K");
  } else {
    const auto profile = io::load_artifact_file<MismatchProfile>(resolve(c.paths.profile, c.cfg, "profile.json"));
    const auto plan = io::load_artifact_file<SamplingPlan>(resolve(c.paths.plan, c.cfg, "plan.json"));
    require(profile.clusters.size() == model.k, Errc::invalid_argument, "profile and model disagree on K");
    std::vector<std::size_t> n_eval(model.k), n_sel(model.k, 0);
    for (std::size_t k = 0; k < model.k; ++k) n_eval[k] = profile.clusters[k].n_eval;
    for (const auto& s : plan.selections) ++n_sel.at(s.cluster);
    state = make_monitor(build_reference(n_eval, n_sel), {c.cfg.window, c.cfg.theta_js, c.cfg.eta});
  }

  const std::string& recs = c.cfg.stream_records;
  const std::string& emb = c.cfg.stream_embeddings;
  require(!recs.empty() && !emb.empty(), Errc::invalid_argument, "--stream-records and --stream-embeddings are required");
  require(fs::exists(recs), Errc::io_failure, "stream records not found: " + recs);
  require(fs::exists(emb), Errc::io_failure, "stream embeddings not found: " + emb);
  Dataset stream;
  try {
    stream = io::load_dataset(recs, emb);
  } catch (const Error& e) {
    throw Error(Errc::parse_error, std::string("malformed stream: ") + e.what());
  }
  require(stream.embeddings.empty() || stream.embeddings.dim() == model.dim, Errc::dimension_mismatch,
          "malformed stream: dimension differs from model");
  const auto asn = clustering::assign(stream.embeddings, model);
  std::vector<std::string> ids;
  ids.reserve(stream.records.size());
  for (const auto& r : stream.records) ids.push_back(r.id);

  const std::size_t history_before = state.js_history.size();
  const auto result = replay(state, ids, asn.labels, {c.cfg.increment, c.rebuild_on_fire});

  std::string audit;
  const auto audit_path = resolve(c.paths.audit, c.cfg, "audit.jsonl");
  if (fs::exists(audit_path)) audit = io::read_file(audit_path);
  std::size_t fired = 0;
  {
    std::size_t h = history_before;
    for (const auto& chk : result.checks) {
      if (chk.window_empty) continue;
      audit += io::audit_line(state.js_history.at(h++), state.theta_js, chk.fire);
      fired += chk.fire ? 1 : 0;
    }
  }
  save_text(audit_path, audit);
  save(resolve(c.paths.state, c.cfg, "monitor_state.json"), state);
  if (!c.paths.updated_model.empty()) {
    // centroid models drift toward the stream; a density tree stays fixed
    const bool centroid = model.method == ClusterMethod::kmeans || model.method == ClusterMethod::agglomerative;
    save(c.paths.updated_model,
         centroid ? incremental_kmeans_update(model, stream.embeddings, asn.labels, state.eta) : model);
  }
  if (std::any_of(result.checks.begin(), result.checks.end(), [](const auto& chk) { return chk.window_empty; }))
    std::cout << "note: window-empty, no divergence evaluated\n";
  std::cout << stream.records.size() << " observations, " << result.checks.size() << " check(s), " << fired
            << " trigger(s)\n";
  return result.any_fired ? kExitFired : kExitOk;
}

int run_anchors(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto model = io::load_artifact_file<ClusterModel>(resolve(c.paths.model, c.cfg, "model.json"));
  const auto asn = io::load_artifact_file<Assignment>(resolve(c.paths.assignment, c.cfg, "assignment.json"));
  require(asn.labels.size() == ds.records.size(), Errc::invalid_argument, "assignment does not cover records");
  std::vector<std::size_t> rows;
  if (!c.paths.manifest.empty()) {
    const auto manifest = io::load_artifact_file<Manifest>(c.paths.manifest);
    const auto ids = manifest_ids(manifest);
    const std::set<std::string> wanted(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (wanted.contains(ds.records[i].id)) rows.push_back(i);
  } else {
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      if (ds.records[i].role == Role::target) rows.push_back(i);
  }
  Dataset training;
  Assignment sub{{}, asn.method, asn.k};
  for (std::size_t r : rows) {
    training.records.push_back(ds.records[r]);
    sub.labels.push_back(asn.labels[r]);
  }
  training.embeddings = ds.embeddings.select(rows);
  const auto buffer = select_anchors(training, sub, model, c.cfg.anchor_fraction);
  save(resolve(c.paths.anchors, c.cfg, "anchors.json"), buffer);
  std::cout << buffer.anchors.size() << " anchors from " << training.records.size() << " training records\n";
  return kExitOk;
}

int run_recipe(Cli& c) {
  const auto plan = io::load_artifact_file<SamplingPlan>(resolve(c.paths.plan, c.cfg, "plan.json"));
  const auto anchors = io::load_artifact_file<AnchorBuffer>(resolve(c.paths.anchors, c.cfg, "anchors.json"));
  const auto manifest_path = resolve(c.paths.manifest, c.cfg, "manifest.json");
  const auto previous_path = c.paths.previous_manifest.empty() ? manifest_path : fs::path(c.paths.previous_manifest);
  const auto previous = io::load_artifact_file<Manifest>(previous_path);
  const auto recipe = emit_recipe(plan, anchors, manifest_ids(previous),
                                  {manifest_path.string(), c.cfg.lambda, c.cfg.beta, c.cfg.epochs});
  save(resolve(c.paths.recipe, c.cfg, "recipe.json"), recipe);
  std::cout << "recipe " << recipe.loss << ": " << recipe.anchor_ids.size() << " anchors, lambda " << recipe.lambda
            << ", beta " << recipe.beta << '\n';
  return kExitOk;
}

int run_route(Cli& c) {
  require(!c.paths.registry.empty(), Errc::invalid_argument, "--registry is required");
  const auto reg = io::load_artifact_file<AdapterRegistry>(c.paths.registry);
  const auto route = resolve_route(c.route_lang, reg, c.has_target_data);
  const char* source = route.source == RouteSource::language_adapter      ? "language-adapter"
                       : route.source == RouteSource::target_only_adapter ? "target-only-adapter"
                                                                          : "pretrained-base";
  std::cout << route.adapter << '\t' << source << '\n';
  return kExitOk;
}

int run_pipeline(Cli& c) {
  const Dataset ds = load_checked(c.cfg);
  const auto result = cluster_dataset(ds, c.cfg);
  const auto profile = profile_for(ds, result.assignment, c.coldstart, c.cfg);
  const SamplingConfig sc{c.cfg.budget, c.cfg.tau_sim, c.cfg.delta, c.cfg.seed, c.cfg.replacement_mode};
  const auto plan = run_sampling(ds, result.assignment, profile, result.model, sc);
  save(resolve(c.paths.model, c.cfg, "model.json"), result.model);
  save(resolve(c.paths.assignment, c.cfg, "assignment.json"), result.assignment);
  save(resolve(c.paths.reports, c.cfg, "reports.json"), result.reports);
  save(resolve(c.paths.profile, c.cfg, "profile.json"), profile);
  save(resolve(c.paths.plan, c.cfg, "plan.json"), plan);
  save(resolve(c.paths.manifest, c.cfg, "manifest.json"), make_manifest(ds, plan));
  if (profile.no_eval_signal) std::cerr << "warning: no-eval-signal: every cluster weight is zero\n";
  warn_underfilled(plan);
  print_summary(std::cout, profile, plan);
  return kExitOk;
}

int run_config(Cli& c) {
  const auto text = io::persist_config(c.cfg);
  if (c.paths.out_records.empty()) {
    std::cout << text;
  } else {
    save_text(c.paths.out_records, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::string option_text(const std::string& what, const char* provenance) {
  return what + " [" + provenance + "]";
}

void add_tunables(CLI::App& app, RunConfig& cfg) {
  auto* g = "Tunables";
  app.add_option("--method", cfg.method, "clustering method: kmeans, agglomerative, density, butina")
      ->capture_default_str()
      ->group(g)
      ->check(CLI::IsMember({"kmeans", "agglomerative", "density", "butina"}));
  app.add_option("--k-min", cfg.kmeans_k.min, option_text("k-means smallest K", kPublished))->capture_default_str()->group(g);
  app.add_option("--k-max", cfg.kmeans_k.max, option_text("k-means largest K", kPublished))->capture_default_str()->group(g);
  app.add_option("--k-step", cfg.kmeans_k.step, option_text("k-means K step", kChosen))->capture_default_str()->group(g);
  app.add_option("--seeds-per-k", cfg.seeds_per_k, option_text("k-means restarts per K", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--agg-k-min", cfg.agglomerative_k.min, option_text("Ward smallest K", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_option("--agg-k-max", cfg.agglomerative_k.max, option_text("Ward largest K", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_option("--agg-k-step", cfg.agglomerative_k.step, option_text("Ward K step", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_option("--min-cluster-sizes", cfg.min_cluster_sizes, option_text("density grid min cluster sizes", kPublished))
      ->delimiter(',')
      ->capture_default_str()
      ->group(g);
  app.add_option("--min-samples", cfg.min_samples, option_text("density grid min samples", kChosen))
      ->delimiter(',')
      ->capture_default_str()
      ->group(g);
  app.add_option("--butina-t-min", cfg.butina_t_min, option_text("Butina smallest distance threshold", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_option("--butina-t-max", cfg.butina_t_max, option_text("Butina largest distance threshold", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_option("--butina-coverage", cfg.butina_coverage, option_text("Butina required assigned fraction", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--epsilon", cfg.epsilon, option_text("weight smoothing constant", kChosen))->capture_default_str()->group(g);
  app.add_option("--budget", cfg.budget, option_text("budget B as a fraction of |D_t|", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--tau-sim", cfg.tau_sim, option_text("near-duplicate cosine similarity", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--delta", cfg.delta, option_text("diversity penalty per selected neighbor", kChosen))
      ->capture_default_str()
      ->group(g);
  app.add_flag("--replacement", cfg.replacement_mode,
               option_text("sample with replacement, 0.5^n decay, at most 3 picks", kPublished))
      ->group(g);
  app.add_option("--theta-js", cfg.theta_js, option_text("drift trigger threshold", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--window", cfg.window, option_text("monitoring window size", kChosen))->capture_default_str()->group(g);
  app.add_option("--increment", cfg.increment, option_text("observations between trigger checks", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--eta", cfg.eta, option_text("incremental k-means rate", kChosen))->capture_default_str()->group(g);
  app.add_option("--anchor-fraction", cfg.anchor_fraction, option_text("anchor buffer fraction", kPublished))
      ->capture_default_str()
      ->group(g);
  app.add_option("--lambda", cfg.lambda, option_text("consolidation strength", kPublished))->capture_default_str()->group(g);
  app.add_option("--beta", cfg.beta, option_text("anchoring weight", kPublished))->capture_default_str()->group(g);
  app.add_option("--epochs", cfg.epochs, option_text("training epochs in the recipe", kChosen))->capture_default_str()->group(g);
  app.add_option("--seed", cfg.seed, "random seed; COMPASS_SEED overrides the config file, this flag overrides both")
      ->capture_default_str()
      ->group(g);
  app.add_option("--out-dir", cfg.out_dir, "default directory for artifacts")->capture_default_str();
  app.add_option("--config", "run configuration file (JSON, keys mirror the tunables)");
}

void add_dataset_inputs(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--records", cfg.records, "records JSONL");
  sub->add_option("--embeddings", cfg.embeddings, "embeddings binary file");
}

int dispatch(int argc, char** argv) {
  Cli c;
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg(argv[i]);
    if (arg == "--config" && i + 1 < argc) c.config_path = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) c.config_path = std::string(arg.substr(9));
  }
  if (!c.config_path.empty()) {
    require(fs::exists(c.config_path), Errc::io_failure, "config file not found: " + c.config_path);
    c.cfg = io::load_config(io::read_file(c.config_path));
  }
  apply_seed_env(c.cfg);

  CLI::App app{"compass: cluster-guided data selection and drift monitoring"};
  app.require_subcommand(1);
  app.fallthrough();
  add_tunables(app, c.cfg);

  auto* gen = app.add_subcommand("gen", "generate synthetic fixtures");
  gen->require_subcommand(1);
  auto* gen_blobs = gen->add_subcommand("blobs", "Gaussian blobs on the unit sphere");
  gen_blobs->add_option("--clusters", c.blobs.n_clusters)->capture_default_str();
  gen_blobs->add_option("--per-cluster", c.blobs.points_per_cluster)->capture_default_str();
  gen_blobs->add_option("--dim", c.blobs.dim)->capture_default_str();
  gen_blobs->add_option("--spread", c.blobs.spread, "pre-normalization sigma")->capture_default_str();
  gen_blobs->add_option("--noise", c.blobs.noise_points, "uniform noise points")->capture_default_str();
  gen_blobs->add_option("--role", c.blob_role)->capture_default_str();
  gen_blobs->add_option("--lang", c.blobs.lang)->capture_default_str();
  gen_blobs->add_option("--out-records", c.paths.out_records);
  gen_blobs->add_option("--out-embeddings", c.paths.out_embeddings);

  auto* gen_fix = gen->add_subcommand("fixture", "target/aux/eval fixture with per-role cluster mixtures");
  gen_fix->add_option("--dim", c.fixture.dim)->capture_default_str();
  gen_fix->add_option("--spread", c.fixture.spread)->capture_default_str();
  gen_fix->add_option("--target-mix", c.target_mix)->capture_default_str();
  gen_fix->add_option("--eval-mix", c.eval_mix)->capture_default_str();
  gen_fix->add_option("--aux-mix", c.aux_mix)->capture_default_str();
  gen_fix->add_option("--n-target", c.fixture.n_target)->capture_default_str();
  gen_fix->add_option("--n-eval", c.fixture.n_eval)->capture_default_str();
  gen_fix->add_option("--n-aux", c.fixture.n_aux)->capture_default_str();
  gen_fix->add_option("--lang", c.fixture.lang)->capture_default_str();
  gen_fix->add_option("--aux-lang", c.fixture.aux_lang)->capture_default_str();
  gen_fix->add_option("--subjects", c.fixture.subjects, "tag target records with this many subjects")->capture_default_str();
  gen_fix->add_option("--out-records", c.paths.out_records);
  gen_fix->add_option("--out-embeddings", c.paths.out_embeddings);

  auto* gen_drift = gen->add_subcommand("drift", "five-phase cyclical drift stream around a model's centroids");
  gen_drift->add_option("--model", c.paths.model);
  gen_drift->add_option("--samples-per-phase", c.samples_per_phase, option_text("samples per phase", kPublished))
      ->capture_default_str();
  gen_drift->add_option("--focus-boost", c.focus_boost, "extra mixture mass on each phase's focus clusters")
      ->capture_default_str();
  gen_drift->add_option("--spread", c.drift_spread)->capture_default_str();
  gen_drift->add_option("--lang", c.fixture.lang)->capture_default_str();
  gen_drift->add_option("--out-records", c.paths.out_records);
  gen_drift->add_option("--out-embeddings", c.paths.out_embeddings);

  auto* gen_bias = gen->add_subcommand("bias", "subject-bias simulation on target records");
  add_dataset_inputs(gen_bias, c.cfg);
  gen_bias->add_option("--bucket-prob", c.bucket_prob, option_text("probability a subject is bucketed", kPublished))
      ->capture_default_str();
  gen_bias->add_option("--retain", c.retain_frac, option_text("fraction a bucketed subject keeps", kPublished))
      ->capture_default_str();
  gen_bias->add_option("--out-records", c.paths.out_records);
  gen_bias->add_option("--out-embeddings", c.paths.out_embeddings);

  auto* ingest = app.add_subcommand("ingest", "validate records and embeddings, fill missing language tags");
  add_dataset_inputs(ingest, c.cfg);
  ingest->add_option("--lang-detect", c.cfg.lang_detect, "command reading text on stdin and printing a tag");
  ingest->add_option("--out-records", c.paths.out_records);
  ingest->add_option("--out-embeddings", c.paths.out_embeddings);

  auto* cluster = app.add_subcommand("cluster", "fit the clustering and assign every record");
  add_dataset_inputs(cluster, c.cfg);
  cluster->add_option("--out-model", c.paths.model);
  cluster->add_option("--out-assignment", c.paths.assignment);
  cluster->add_option("--out-reports", c.paths.reports);

  auto* mismatch = app.add_subcommand("mismatch", "per-cluster counts, ratios and weights");
  add_dataset_inputs(mismatch, c.cfg);
  mismatch->add_option("--assignment", c.paths.assignment);
  mismatch->add_option("--coldstart", c.coldstart, "none, self or borrow:<lang>")->capture_default_str();
  mismatch->add_option("--out-profile", c.paths.profile);

  auto* sample = app.add_subcommand("sample", "draw the auxiliary selection");
  add_dataset_inputs(sample, c.cfg);
  sample->add_option("--model", c.paths.model);
  sample->add_option("--assignment", c.paths.assignment);
  sample->add_option("--profile", c.paths.profile);
  sample->add_option("--out-plan", c.paths.plan);
  sample->add_option("--out-manifest", c.paths.manifest);

  auto* monitor = app.add_subcommand("monitor", "consume a stream and evaluate the drift trigger");
  monitor->add_option("--model", c.paths.model);
  monitor->add_option("--state", c.paths.state, "monitor state to resume and overwrite");
  monitor->add_option("--profile", c.paths.profile, "builds the reference with --plan when no state exists");
  monitor->add_option("--plan", c.paths.plan);
  monitor->add_option("--stream-records", c.cfg.stream_records);
  monitor->add_option("--stream-embeddings", c.cfg.stream_embeddings);
  monitor->add_option("--audit-log", c.paths.audit);
  monitor->add_option("--out-model", c.paths.updated_model, "write the incrementally updated model here");
  monitor->add_flag("--rebuild-on-fire", c.rebuild_on_fire, "rebuild the reference from the window after each fire");

  auto* anchors = app.add_subcommand("anchors", "select the anchor buffer from the previous training set");
  add_dataset_inputs(anchors, c.cfg);
  anchors->add_option("--model", c.paths.model);
  anchors->add_option("--assignment", c.paths.assignment);
  anchors->add_option("--manifest", c.paths.manifest, "training set; defaults to all target records");
  anchors->add_option("--out-anchors", c.paths.anchors);

  auto* recipe = app.add_subcommand("recipe", "emit the training recipe");
  recipe->add_option("--plan", c.paths.plan);
  recipe->add_option("--anchors", c.paths.anchors);
  recipe->add_option("--manifest", c.paths.manifest, "manifest named by the recipe");
  recipe->add_option("--previous-manifest", c.paths.previous_manifest, "training set the anchors came from");
  recipe->add_option("--out-recipe", c.paths.recipe);

  auto* route = app.add_subcommand("route", "resolve the adapter for a language");
  route->add_option("--registry", c.paths.registry)->required();
  route->add_option("--lang", c.route_lang)->required();
  route->add_flag("--has-target-data", c.has_target_data);

  auto* pipeline = app.add_subcommand("pipeline", "cluster, profile and sample in one run");
  add_dataset_inputs(pipeline, c.cfg);
  pipeline->add_option("--coldstart", c.coldstart, "none, self or borrow:<lang>")->capture_default_str();

  auto* config = app.add_subcommand("config", "print the effective configuration");
  config->add_option("--out", c.paths.out_records, "write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  validate_config(c.cfg);

  if (gen_blobs->parsed()) return run_gen_blobs(c);
  if (gen_fix->parsed()) return run_gen_fixture(c);
  if (gen_drift->parsed()) return run_gen_drift(c);
  if (gen_bias->parsed()) return run_gen_bias(c);
  if (ingest->parsed()) return run_ingest(c);
  if (cluster->parsed()) return run_cluster(c);
  if (mismatch->parsed()) return run_mismatch(c);
  if (sample->parsed()) return run_sample(c);
  if (monitor->parsed()) return run_monitor(c);
  if (anchors->parsed()) return run_anchors(c);
  if (recipe->parsed()) return run_recipe(c);
  if (route->parsed()) return run_route(c);
  if (pipeline->parsed()) return run_pipeline(c);
  if (config->parsed()) return run_config(c);
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const compass::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}
