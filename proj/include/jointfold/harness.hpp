#pragma once

// Experiment configs, runners and the verify-all property battery.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointfold/cloud_io.hpp"
#include "jointfold/core_geometry.hpp"
#include "jointfold/fusion.hpp"
#include "jointfold/isomap.hpp"
#include "jointfold/manifold_models.hpp"
#include "jointfold/reach.hpp"
#include "jointfold/rng.hpp"
#include "jointfold/separation.hpp"

#ifndef JOINTFOLD_VERSION
#define JOINTFOLD_VERSION "0.1.0"
#endif

namespace jointfold {

using json = nlohmann::json;

inline constexpr const char* kVersion = JOINTFOLD_VERSION;

// Config reading --------------------------------------------------------------------

/// Reads fields of one JSON object and rejects the ones never asked for.
class ObjectReader {
 public:
  ObjectReader(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return fallback;
    return convert<T>(*it, field(key));
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) throw ConfigError(field(key) + ": required field missing");
    return convert<T>(*it, field(key));
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown field '" + field(item.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError(path + ": expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + ": expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path + ": wrong type");
    }
  }

  json j_;  // owned: callers often pass temporaries
  std::string path_;
  std::set<std::string> seen_;
};

inline SamplingStrategy parse_strategy(const std::string& name, std::uint64_t seed, const std::string& path) {
  if (name == "grid") return SamplingStrategy::grid();
  if (name == "random" || name == "uniform") return SamplingStrategy::uniform_random(seed);
  throw ConfigError(path + ": strategy must be 'grid' or 'random'");
}

inline Vector parse_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a nonempty array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
    out(static_cast<Index>(i)) = v[i].get<double>();
  }
  return out;
}

inline ParamBox parse_box(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  const json* lo = r.child("lower");
  const json* hi = r.child("upper");
  if (!lo || !hi) throw ConfigError(path + ": needs 'lower' and 'upper'");
  r.finish();
  ParamBox box{parse_vector(*lo, path + ".lower"), parse_vector(*hi, path + ".upper")};
  if (box.lower.size() != box.upper.size()) throw ConfigError(path + ": lower/upper lengths differ");
  return box;
}

/// One generator description, e.g. {"manifold": "ellipse", "a": 7, "b": 6, "img_side": 64}.
/// "helix" expands to its two components.
inline std::vector<ParametricManifold> parse_generator(const json& v, const std::string& path, ObjectReader* outer = nullptr) {
  ObjectReader own(v, path);
  ObjectReader& r = outer ? *outer : own;
  const auto kind = r.require<std::string>("manifold");
  std::vector<ParametricManifold> out;
  if (kind == "circle") {
    out.push_back(make_circle(r.get("radius", 1.0)));
  } else if (kind == "interval") {
    out.push_back(make_interval(r.get("lo", 0.0), r.get("hi", 2.0 * std::numbers::pi)));
  } else if (kind == "line") {
    const json* dir = r.child("direction");
    out.push_back(make_line(r.get("lo", 0.0), r.get("hi", 1.0),
                            dir ? parse_vector(*dir, r.field("direction")) : Vector(Vector::Ones(1))));
  } else if (kind == "helix") {
    for (auto& c : make_helix_pair().components) out.push_back(std::move(c));
  } else if (kind == "trig") {
    out.push_back(make_trig_curve(r.get<std::uint64_t>("seed", 0), r.get<Index>("dim", 3), r.get<int>("degree", 3)));
  } else if (kind == "ellipse") {
    EllipseRender render{r.get("smoothing_width", 1.0), r.get("binary", false)};
    std::optional<ParamBox> box;
    if (const json* d = r.child("domain")) box = parse_box(*d, r.field("domain"));
    out.push_back(make_ellipse_manifold(r.require<double>("a"), r.require<double>("b"), r.get("img_side", 64), render, box));
  } else {
    throw ConfigError(r.field("manifold") + ": unknown manifold '" + kind + "'");
  }
  if (!outer) own.finish();
  return out;
}

inline JointManifoldSpec parse_components(const json* v, const std::string& path, JointManifoldSpec fallback) {
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) throw ConfigError(path + ": expected a nonempty array of generators");
  JointManifoldSpec spec;
  for (std::size_t i = 0; i < v->size(); ++i)
    for (auto& m : parse_generator((*v)[i], path + "[" + std::to_string(i) + "]")) spec.components.push_back(std::move(m));
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return spec;
}

// Check records -----------------------------------------------------------------------

struct Check {
  std::string module;
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "=="
  bool pass = false;
  /// Failing assertion-class checks make the run fail; others are observations.
  bool assertion = true;
  std::string detail;
};

inline Check check_le(std::string module, std::string name, double measured, double threshold, std::string detail = {}) {
  return {std::move(module), std::move(name), measured, threshold, "<=", measured <= threshold, true, std::move(detail)};
}
inline Check check_ge(std::string module, std::string name, double measured, double threshold, std::string detail = {}) {
  return {std::move(module), std::move(name), measured, threshold, ">=", measured >= threshold, true, std::move(detail)};
}
inline Check observation(Check c) {
  c.assertion = false;
  return c;
}

inline json to_json(const Check& c) {
  return {{"module", c.module}, {"name", c.name},           {"measured", c.measured}, {"threshold", c.threshold},
          {"relation", c.relation}, {"pass", c.pass}, {"assertion", c.assertion}, {"detail", c.detail}};
}

/// Deterministic CSV: no timestamps, %.17g numbers.
inline void write_checks_csv(std::ostream& out, const std::vector<Check>& checks) {
  out << "module,name,measured,relation,threshold,pass,assertion\n";
  for (const auto& c : checks)
    out << c.module << ',' << c.name << ',' << detail::format_double(c.measured) << ',' << c.relation << ','
        << detail::format_double(c.threshold) << ',' << (c.pass ? "pass" : "fail") << ','
        << (c.assertion ? "assert" : "observe") << '\n';
}

// Report serialization ----------------------------------------------------------------

inline json to_json(const ReachEstimate& e) {
  json j{{"bounded", e.bounded}, {"pairs", e.num_pairs_evaluated},
         {"argmin_pair", {e.argmin_pair.first, e.argmin_pair.second}}};
  j["tau"] = e.bounded ? json(e.tau) : json("unbounded");
  j["raw_min"] = std::isfinite(e.raw_min) ? json(e.raw_min) : json(nullptr);
  return j;
}

inline json to_json(const ClassifierBoundReport& r) {
  return {{"J", r.num_components},
          {"sigma", r.sigma},
          {"epsilon", r.epsilon},
          {"trials", r.trials},
          {"seed", r.seed},
          {"delta_star", r.delta_star},
          {"delta_k", r.delta_k},
          {"c_star", r.c_star},
          {"c_k", r.c_k},
          {"bound_joint", r.bound_joint},
          {"bound_component", r.bound_component},
          {"errors_joint", r.errors_joint},
          {"errors_component", r.errors_component},
          {"empirical_error_joint", r.empirical_error_joint},
          {"empirical_error_component", r.empirical_error_component},
          {"fill_radius_a", r.fill_radius_a},
          {"fill_radius_b", r.fill_radius_b},
          {"joint_hypothesis", r.joint_hypothesis},
          {"sigma_ok", r.sigma_ok},
          {"within_joint_share", r.within_joint_share},
          {"within_others_mean", r.within_others_mean},
          {"hypothesis_ok", r.hypothesis_ok},
          {"c_order", r.c_order},
          {"c_strict", r.c_strict},
          {"joint_le_mean_component", r.joint_le_mean_component()},
          {"skipped", r.skipped}};
}

inline json to_json(const DistortionReport& r) {
  return {{"M", r.measurements},
          {"projection_seed", r.projection_seed},
          {"epsilon_hat", r.epsilon_hat},
          {"median_distortion", r.median_distortion},
          {"pairs_tested", r.pairs_tested},
          {"target_epsilon", r.target_epsilon},
          {"geodesic_epsilon_hat", r.geodesic_epsilon_hat}};
}

inline json to_json(const BudgetReport& b) {
  return {{"K", b.k}, {"N", b.n}, {"J", b.j}, {"tau_star", b.tau_star}, {"epsilon", b.epsilon},
          {"c", b.constant}, {"per_sensor", b.per_sensor}, {"joint", b.joint}, {"ratio", b.ratio()}};
}

// Experiment config ----------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"helix",   "reach",  "classify", "fuse",
                                              "ellipse-learn", "isomap", "sample",   "verify-all"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
  /// Module blocks, validated when the experiment runs.
  json blocks = json::object();
  /// Overrides the classify trial count when set.
  std::optional<Index> trials;

  /// Canonical text used for the config hash.
  std::string canonical() const {
    json j = blocks;
    j["experiment"] = experiment;
    j["seed"] = seed;
    if (trials) j["trials_override"] = *trials;
    return j.dump();
  }
};

inline ExperimentConfig parse_config(const json& j) {
  ObjectReader r(j, "");
  ExperimentConfig cfg;
  cfg.experiment = r.get<std::string>("experiment", "");
  cfg.seed = r.get<std::uint64_t>("seed", 1);
  cfg.threads = r.get<int>("threads", 0);
  cfg.out = r.get<std::string>("out", "");
  for (const char* block : {"helix", "reach", "classify", "fuse", "ellipse", "isomap", "sample", "verify"})
    if (const json* b = r.child(block)) {
      if (!b->is_object()) throw ConfigError(std::string(block) + ": expected an object");
      cfg.blocks[block] = *b;
    }
  r.finish();
  if (!cfg.experiment.empty() &&
      std::find(experiment_names().begin(), experiment_names().end(), cfg.experiment) == experiment_names().end())
    throw ConfigError("experiment: unknown experiment '" + cfg.experiment + "'");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

// Run manifest ---------------------------------------------------------------------------

struct RunManifest {
  std::string experiment;
  std::string version = kVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  json report = json::object();

  bool passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const Check& c) { return c.assertion && !c.pass; });
  }
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(cfg.canonical())));
  return buf;
}

inline json to_json(const RunManifest& m) {
  json checks = json::array();
  for (const auto& c : m.checks) checks.push_back(to_json(c));
  return {{"experiment", m.experiment}, {"version", m.version},   {"config_hash", m.config_hash},
          {"seed", m.seed},             {"started_at", m.started_at}, {"finished_at", m.finished_at},
          {"passed", m.passed()},       {"checks", checks},       {"warnings", m.warnings},
          {"report", m.report}};
}

// Output helpers ---------------------------------------------------------------------------

class OutputDir {
 public:
  explicit OutputDir(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }
  std::string path(const std::string& name) const { return (std::filesystem::path(dir_) / name).string(); }

  std::ofstream open(const std::string& name) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path(name));
    return out;
  }
  void write_json(const std::string& name, const json& j) const {
    if (!enabled()) return;
    open(name) << j.dump(2) << '\n';
  }

 private:
  std::string dir_;
};

namespace detail {

inline json block(const ExperimentConfig& cfg, const char* name) {
  return cfg.blocks.contains(name) ? cfg.blocks[name] : json::object();
}

/// Two families of parallel segments at distance `gap` in every component:
/// A_j = {(t, 0)}, B_j = {(t, gap)}, t on a uniform grid of [0, 1].
inline std::pair<JointCloud, JointCloud> parallel_segment_clouds(Index components, Index samples, double gap) {
  if (components < 1 || samples < 2 || !(gap > 0.0)) throw ConfigError("segment clouds need J >= 1, S >= 2, gap > 0");
  JointCloud a, b;
  RowMatrix params(samples, 1);
  for (Index i = 0; i < samples; ++i) params(i, 0) = static_cast<double>(i) / static_cast<double>(samples - 1);
  for (Index j = 0; j < components; ++j) {
    PointCloud ca, cb;
    ca.params = cb.params = params;
    ca.points.resize(samples, 2);
    cb.points.resize(samples, 2);
    ca.points.col(0) = params.col(0);
    cb.points.col(0) = params.col(0);
    ca.points.col(1).setZero();
    cb.points.col(1).setConstant(gap);
    ca.label = "A" + std::to_string(j);
    cb.label = "B" + std::to_string(j);
    a.components.push_back(std::move(ca));
    b.components.push_back(std::move(cb));
  }
  return {a, b};
}

}  // namespace detail

// Experiments ---------------------------------------------------------------------------------

struct ClassifySettings {
  Index components = 4;
  Index samples = 50;
  double gap = 1.0;
  double sigma = 0.4;
  double epsilon = 1.0;
  double concentration = 4.0;
  Index trials = 100000;
};

inline ClassifySettings parse_classify(const json& v) {
  ObjectReader r(v, "classify");
  ClassifySettings s;
  s.components = r.get("J", s.components);
  s.samples = r.get("samples", s.samples);
  s.gap = r.get("gap", s.gap);
  s.sigma = r.get("sigma", s.sigma);
  s.epsilon = r.get("epsilon", s.epsilon);
  s.concentration = r.get("concentration", s.concentration);
  s.trials = r.get("trials", s.trials);
  r.finish();
  return s;
}

inline void run_classify(const ExperimentConfig& cfg, RunManifest& m, const OutputDir&) {
  ClassifySettings s = parse_classify(detail::block(cfg, "classify"));
  if (cfg.trials) s.trials = *cfg.trials;
  const auto [a, b] = detail::parallel_segment_clouds(s.components, s.samples, s.gap);
  NoiseModel nm{s.sigma, s.epsilon, 0, NormConvention::MeanNorm, s.concentration};
  const auto r = run_classification_experiment(a, b, nm, s.trials, derive_seed(cfg.seed, "classify"), cfg.threads);
  m.report = to_json(r);
  for (const auto& c : r.checks) m.checks.push_back(check_le("separation_classify", c.name, c.lhs, c.rhs));
  for (const auto& w : r.skipped) m.warnings.push_back("hypothesis not met, assertion skipped: " + w);
  double mean = 0.0;
  for (const double e : r.empirical_error_component) mean += e;
  mean /= static_cast<double>(r.empirical_error_component.size());
  m.checks.push_back(observation(check_le("separation_classify", "joint_error_le_mean_component", r.empirical_error_joint, mean)));
}

struct ReachSettings {
  JointManifoldSpec spec = make_helix_pair();
  Index samples = 4000;
  SamplingStrategy strategy = SamplingStrategy::grid();
  double slack = 0.03;
};

inline ReachSettings parse_reach(const json& v, std::uint64_t seed) {
  ObjectReader r(v, "reach");
  ReachSettings s;
  s.spec = parse_components(r.child("components"), "reach.components", s.spec);
  s.samples = r.get("samples", s.samples);
  s.strategy = parse_strategy(r.get<std::string>("strategy", "grid"), derive_seed(seed, "reach/sample"), "reach.strategy");
  s.slack = r.get("slack", s.slack);
  r.finish();
  return s;
}

inline void run_reach(const ExperimentConfig& cfg, RunManifest& m, const OutputDir&) {
  const ReachSettings s = parse_reach(detail::block(cfg, "reach"), cfg.seed);
  ReachOptions opt;
  opt.threads = cfg.threads;
  opt.subsample_seed = derive_seed(cfg.seed, "reach/subsample");
  const auto r = verify_cond_jam(s.spec, s.samples, s.strategy, opt, s.slack);
  json comps = json::array();
  for (std::size_t j = 0; j < r.components.size(); ++j) {
    json c = to_json(r.components[j]);
    c["manifold"] = s.spec.components[j].name();
    comps.push_back(c);
  }
  m.report = {{"components", comps},
              {"joint", to_json(r.joint)},
              {"min_component_tau", std::isfinite(r.min_component_tau) ? json(r.min_component_tau) : json("unbounded")},
              {"better_than_best", r.better_than_best},
              {"samples", s.samples}};
  if (s.spec.components.size() > 1) {
    const double floor = std::isfinite(r.min_component_tau) ? r.min_component_tau * (1.0 - s.slack) : 0.0;
    m.checks.push_back(check_ge("reach", "cond_jam", r.joint.bounded ? r.joint.tau : std::numeric_limits<double>::max(), floor));
  }
}

struct HelixSettings {
  Index samples = 4000;
  Index vertices = 10000;
};

inline void run_helix(const ExperimentConfig& cfg, RunManifest& m, const OutputDir&) {
  ObjectReader r(detail::block(cfg, "helix"), "helix");
  HelixSettings s;
  s.samples = r.get("samples", s.samples);
  s.vertices = r.get("vertices", s.vertices);
  r.finish();
  const JointManifoldSpec spec = make_helix_pair();
  ReachOptions opt;
  opt.threads = cfg.threads;
  const auto cj = verify_cond_jam(spec, s.samples, SamplingStrategy::grid(), opt);
  const double stated = std::sqrt(std::numbers::pi * std::numbers::pi / 2.0 + 1.0);
  // (theta, cos theta, sin theta) has curvature 1/2 everywhere
  const double curvature_radius = 2.0;
  const double geo = parameter_geodesic(spec.joint(), Vector::Constant(1, 1.0), Vector::Constant(1, 4.0), s.vertices);
  m.report = {{"joint", to_json(cj.joint)},
              {"interval", to_json(cj.components[0])},
              {"circle", to_json(cj.components[1])},
              {"curvature_radius", curvature_radius},
              {"closed_form_sqrt_pi2_over_2_plus_1", stated},
              {"geodesic_1_to_4", geo},
              {"sqrt2_times_3", 3.0 * std::numbers::sqrt2}};
  m.checks.push_back(check_le("reach", "helix_tau_vs_curvature_radius", std::abs(cj.joint.tau - curvature_radius) / curvature_radius, 0.03));
  m.checks.push_back(observation(check_le("reach", "helix_tau_vs_closed_form", std::abs(cj.joint.tau - stated) / stated, 0.03,
                                          "sqrt(pi^2/2+1) exceeds the curvature radius 2")));
  m.checks.push_back(check_le("core_geometry", "helix_geodesic_sqrt2_scaling", std::abs(geo / (3.0 * std::numbers::sqrt2) - 1.0), 1e-3));
}

struct FuseSettings {
  double constant = kCalibratedMeasurementConstant;
  Index measurements = 0;  // 0: calibrated
  Index seeds = 20;
  Index pairs = 2000;
  double target_epsilon = 0.25;
  std::string kind = "gaussian";
  Index geodesic_knn = 0;
  Index classify_trials = 20000;
  Index classify_seeds = 5;
};

inline void run_fuse(const ExperimentConfig& cfg, RunManifest& m, const OutputDir&) {
  ObjectReader r(detail::block(cfg, "fuse"), "fuse");
  FuseSettings s;
  s.constant = r.get("c", s.constant);
  s.measurements = r.get("measurements", s.measurements);
  s.seeds = r.get("seeds", s.seeds);
  s.pairs = r.get("pairs", s.pairs);
  s.target_epsilon = r.get("target_epsilon", s.target_epsilon);
  s.kind = r.get("kind", s.kind);
  s.geodesic_knn = r.get("geodesic_knn", s.geodesic_knn);
  s.classify_trials = r.get("classify_trials", s.classify_trials);
  s.classify_seeds = r.get("classify_seeds", s.classify_seeds);
  r.finish();
  if (s.kind != "gaussian" && s.kind != "orthonormal") throw ConfigError("fuse.kind: 'gaussian' or 'orthonormal'");
  const ProjectionKind kind = s.kind == "gaussian" ? ProjectionKind::Gaussian : ProjectionKind::OrthonormalRows;

  const EllipseExperimentConfig ell;
  JointManifoldSpec spec;
  for (const auto& [a, b] : ell.axes)
    spec.components.push_back(make_ellipse_manifold(a, b, ell.img_side, EllipseRender{ell.smoothing_width, ell.binary}, ell.domain));
  const JointCloud cloud = sample_joint(spec, SamplingStrategy::grid(), ell.grid_side * ell.grid_side, cfg.threads);
  const Index mm = s.measurements > 0 ? s.measurements
                                      : calibrated_measurements(2, cloud.num_components(), cloud.joint_dim(), s.constant);
  DistortionOptions opt;
  opt.num_pairs = s.pairs;
  opt.pair_seed = derive_seed(cfg.seed, "fuse/pairs");
  opt.target_epsilon = s.target_epsilon;
  opt.geodesic_knn = s.geodesic_knn;
  opt.threads = cfg.threads;
  json runs = json::array();
  double worst = 0.0;
  for (Index i = 0; i < s.seeds; ++i) {
    const auto op = ProjectionOperator::make(mm, cloud.component_dims(), derive_seed(derive_seed(cfg.seed, "fuse/operator"), static_cast<std::uint64_t>(i)), kind);
    const auto d = measure_distortion(op, cloud, opt);
    worst = std::max(worst, d.epsilon_hat);
    runs.push_back(to_json(d));
  }
  m.checks.push_back(check_le("fusion", "ellipse_max_epsilon_hat", worst, s.target_epsilon));

  const auto [a, b] = detail::parallel_segment_clouds(4, 50, 1.0);
  const NoiseModel nm{0.4, 1.0, 0, NormConvention::MeanNorm, 4.0};
  const Index mc = calibrated_measurements(1, a.num_components(), a.joint_dim(), s.constant);
  double worst_shift = 0.0;
  json shifts = json::array();
  for (Index i = 0; i < s.classify_seeds; ++i) {
    const auto op = ProjectionOperator::make(mc, a.component_dims(), derive_seed(derive_seed(cfg.seed, "fuse/classify_operator"), static_cast<std::uint64_t>(i)));
    const auto pc = projected_classification(a, b, nm, s.classify_trials, derive_seed(cfg.seed, "fuse/classify"), op, cfg.threads);
    worst_shift = std::max(worst_shift, pc.shift());
    shifts.push_back({{"M", pc.measurements}, {"projection_seed", op.seed()}, {"error_unprojected", pc.error_unprojected},
                      {"error_projected", pc.error_projected}});
  }
  m.checks.push_back(check_le("fusion", "classification_error_shift", worst_shift, 0.02));

  json budgets = json::array();
  for (const Index j : {1, 2, 3, 10, 100})
    budgets.push_back(to_json(compare_per_sensor_vs_joint(2, ell.img_side * ell.img_side, j, 1.0, s.target_epsilon, s.constant)));
  m.report = {{"M", mm}, {"c", s.constant}, {"kind", s.kind}, {"joint_dim", cloud.joint_dim()}, {"distortion", runs},
              {"classification", shifts}, {"classification_M", mc}, {"budgets", budgets}};
}

inline EllipseExperimentConfig parse_ellipse(const json& v, std::uint64_t seed) {
  ObjectReader r(v, "ellipse");
  EllipseExperimentConfig c;
  c.seed = derive_seed(seed, "ellipse");
  c.img_side = r.get("img_side", c.img_side);
  if (const json* axes = r.child("axes")) {
    if (!axes->is_array() || axes->empty()) throw ConfigError("ellipse.axes: expected [[a, b], ...]");
    c.axes.clear();
    for (std::size_t i = 0; i < axes->size(); ++i) {
      const Vector ab = parse_vector((*axes)[i], "ellipse.axes[" + std::to_string(i) + "]");
      if (ab.size() != 2) throw ConfigError("ellipse.axes[" + std::to_string(i) + "]: expected [a, b]");
      c.axes.emplace_back(ab(0), ab(1));
    }
  }
  if (const json* d = r.child("domain")) c.domain = parse_box(*d, "ellipse.domain");
  c.grid_side = r.get("grid_side", c.grid_side);
  c.smoothing_width = r.get("smoothing_width", c.smoothing_width);
  c.binary = r.get("binary", c.binary);
  c.knn = r.get("knn", c.knn);
  c.embed_dim = r.get("dim", c.embed_dim);
  if (const json* n = r.child("noise_levels")) {
    const Vector levels = parse_vector(*n, "ellipse.noise_levels");
    c.noise_levels.assign(levels.data(), levels.data() + levels.size());
  }
  r.finish();
  return c;
}

inline void write_embedding_csv(std::ostream& out, const RowMatrix& coords, const RowMatrix& params) {
  out << "sample_id";
  for (Index c = 0; c < coords.cols(); ++c) out << ",coord_" << c;
  for (Index c = 0; c < params.cols(); ++c) out << ",param_" << c;
  out << '\n';
  for (Index i = 0; i < coords.rows(); ++i) {
    out << i;
    for (Index c = 0; c < coords.cols(); ++c) out << ',' << detail::format_double(coords(i, c));
    for (Index c = 0; c < params.cols(); ++c) out << ',' << detail::format_double(params(i, c));
    out << '\n';
  }
}

inline void write_spectrum_csv(std::ostream& out, const Vector& spectrum) {
  out << "index,eigenvalue\n";
  for (Index i = 0; i < spectrum.size(); ++i) out << i << ',' << detail::format_double(spectrum(i)) << '\n';
}

inline void run_ellipse_learn(const ExperimentConfig& cfg, RunManifest& m, const OutputDir& out) {
  const EllipseExperimentConfig c = parse_ellipse(detail::block(cfg, "ellipse"), cfg.seed);
  const auto rep = run_ellipse_experiment(c, cfg.threads);
  json levels = json::array();
  std::ostringstream table;
  table << "noise_std,run,residual_variance,recovery_fraction\n";
  for (std::size_t l = 0; l < rep.levels.size(); ++l) {
    const auto& lv = rep.levels[l];
    json runs = json::array();
    auto add = [&](const EmbeddingRun& run) {
      runs.push_back({{"label", run.label}, {"residual_variance", run.residual_variance},
                      {"recovery_fraction", run.recovery_fraction}, {"graph_restricted", run.graph_restricted},
                      {"truncated", run.truncated}});
      table << detail::format_double(lv.noise_std) << ',' << run.label << ',' << detail::format_double(run.residual_variance)
            << ',' << detail::format_double(run.recovery_fraction) << '\n';
      if (run.graph_restricted) m.warnings.push_back("disconnected graph for " + run.label + "; largest component used");
      if (out.enabled()) {
        auto f = out.open("embedding_noise" + std::to_string(l) + "_" + run.label + ".csv");
        write_embedding_csv(f, run.coords, run.params);
      }
    };
    for (const auto& comp : lv.components) add(comp);
    add(lv.joint);
    levels.push_back({{"noise_std", lv.noise_std}, {"runs", runs},
                      {"mean_component_residual_variance", lv.mean_component_residual_variance()}});
    m.checks.push_back(check_le("isomap", "joint_rv_le_mean_component_rv[noise=" + detail::format_double(lv.noise_std) + "]",
                                lv.joint.residual_variance, lv.mean_component_residual_variance()));
    if (lv.noise_std == 0.0) {
      double worst = 0.0;
      for (const auto& comp : lv.components) worst = std::max(worst, comp.recovery_fraction);
      worst = std::max(worst, lv.joint.recovery_fraction);
      m.checks.push_back(check_le("isomap", "noiseless_recovery_fraction", worst, 0.05));
    }
  }
  if (out.enabled()) out.open("ellipse_residual_variance.csv") << table.str();
  m.report = {{"grid_spacing", rep.grid_spacing}, {"joint_dim", rep.joint_dim}, {"knn", c.knn},
              {"smoothing_width", c.smoothing_width}, {"levels", levels}};
}

inline void run_isomap_experiment(const ExperimentConfig& cfg, RunManifest& m, const OutputDir& out) {
  ObjectReader r(detail::block(cfg, "isomap"), "isomap");
  JointManifoldSpec fallback;
  fallback.components.push_back(make_circle(1.0));
  const JointManifoldSpec spec = parse_components(r.child("components"), "isomap.components", fallback);
  const Index samples = r.get<Index>("samples", 400);
  const SamplingStrategy strategy = parse_strategy(r.get<std::string>("strategy", "grid"), derive_seed(cfg.seed, "isomap/sample"), "isomap.strategy");
  const Index knn = r.get<Index>("knn", 8);
  const double radius = r.get("epsilon", 0.0);
  const Index dim = r.get<Index>("dim", 2);
  r.finish();
  const PointCloud cloud = concat(sample_joint(spec, strategy, samples, cfg.threads));
  const GraphRule rule = radius > 0.0 ? GraphRule::epsilon(radius) : GraphRule::knn(knn);
  const IsomapResult iso = isomap(cloud, rule, dim, cfg.threads);
  if (iso.geodesics.restricted)
    m.warnings.push_back("graph disconnected (" + std::to_string(iso.graph.num_components) + " components); largest component used");
  if (iso.embedding.truncated) m.warnings.push_back("fewer positive eigenvalues than the requested dimension");
  RowMatrix params(static_cast<Index>(iso.geodesics.vertices.size()), cloud.param_dim());
  for (std::size_t i = 0; i < iso.geodesics.vertices.size(); ++i)
    params.row(static_cast<Index>(i)) = cloud.params.row(iso.geodesics.vertices[i]);
  if (out.enabled()) {
    auto e = out.open("embedding.csv");
    write_embedding_csv(e, iso.embedding.coords, params);
    auto sp = out.open("spectrum.csv");
    write_spectrum_csv(sp, iso.embedding.spectrum);
  }
  m.report = {{"samples", cloud.size()}, {"ambient_dim", cloud.ambient_dim()}, {"edges", iso.graph.num_edges()},
              {"graph_components", iso.graph.num_components}, {"restricted", iso.geodesics.restricted},
              {"residual_variance", iso.embedding.residual_variance}, {"truncated", iso.embedding.truncated}};
}

inline void run_sample(const ExperimentConfig& cfg, RunManifest& m, const OutputDir& out) {
  const json v = detail::block(cfg, "sample");
  ObjectReader r(v, "sample");
  JointManifoldSpec spec;
  if (v.contains("manifold")) {
    spec.components = parse_generator(v, "sample", &r);
  } else {
    JointManifoldSpec fallback;
    fallback.components.push_back(make_circle(1.0));
    spec = parse_components(r.child("components"), "sample.components", fallback);
  }
  const Index samples = r.get<Index>("samples", 400);
  const SamplingStrategy strategy = parse_strategy(r.get<std::string>("strategy", "grid"), derive_seed(cfg.seed, "sample"), "sample.strategy");
  const bool csv = r.get("csv", false);
  r.finish();
  const JointCloud jc = sample_joint(spec, strategy, samples, cfg.threads);
  json files = json::array();
  auto emit = [&](const PointCloud& c, const std::string& stem) {
    if (!out.enabled()) return;
    save_cloud(out.path(stem + ".jfld"), c);
    files.push_back(stem + ".jfld");
    if (csv) {
      auto f = out.open(stem + ".csv");
      write_cloud_csv(f, c);
      files.push_back(stem + ".csv");
    }
  };
  for (std::size_t j = 0; j < jc.components.size(); ++j) emit(jc.components[j], "component_" + std::to_string(j));
  if (jc.components.size() > 1) emit(concat(jc), "joint");
  m.report = {{"samples", jc.size()}, {"components", jc.num_components()}, {"joint_dim", jc.joint_dim()}, {"files", files}};
}

// verify-all -----------------------------------------------------------------------------------

struct VerifySettings {
  Index trials = 20000;
  Index random_cases = 100;
};

namespace detail {

inline RowMatrix gaussian_matrix(CounterRng& rng, Index rows, Index cols, double scale = 1.0, double shift = 0.0) {
  std::normal_distribution<double> normal;
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = shift + scale * normal(rng);
  return m;
}

inline Index uniform_index(CounterRng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

/// Floyd-Warshall on the adjacency of g.
inline DistanceMatrix floyd_warshall(const NeighborhoodGraph& g) {
  const Index s = g.num_vertices();
  DistanceMatrix d = DistanceMatrix::Constant(s, s, std::numeric_limits<double>::infinity());
  for (Index i = 0; i < s; ++i) {
    d(i, i) = 0.0;
    for (const auto& e : g.adjacency[static_cast<std::size_t>(i)]) d(i, e.to) = std::min(d(i, e.to), e.weight);
  }
  for (Index k = 0; k < s; ++k)
    for (Index i = 0; i < s; ++i)
      for (Index j = 0; j < s; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

inline JointCloud random_joint_cloud(CounterRng& rng, const std::vector<Index>& dims, Index samples, double shift) {
  JointCloud jc;
  RowMatrix params(samples, 1);
  for (Index i = 0; i < samples; ++i) params(i, 0) = static_cast<double>(i);
  for (const Index d : dims) {
    PointCloud c;
    c.points = gaussian_matrix(rng, samples, d, 1.0, shift);
    c.params = params;
    jc.components.push_back(std::move(c));
  }
  return jc;
}

}  // namespace detail

inline std::vector<std::string> verify_all_check_names() {
  return {"joint_distance_decomposition", "path_length_sandwich",      "isometric_geodesic_scaling",
          "refinement_monotonicity",      "joint_sampling_alignment",  "ellipse_eccentricity_reach_order",
          "render_determinism",           "reach_scale_equivariance",  "reach_density_monotone_circle",
          "reach_density_monotone_helix", "cond_jam_battery",          "separation_chain",
          "djam_inequalities",            "zero_error_regime",         "bound_ordering",
          "classifier_scale_invariance",  "geodesic_triangle_inequality", "geodesic_matches_oracle",
          "mds_exact_recovery",           "joint_rho_sandwich",        "jml_ratio_bias",
          "fusion_identity",              "distortion_concentration",  "downstream_preservation",
          "replay_determinism",           "manifest_completeness"};
}

inline std::vector<Check> verify_all(std::uint64_t root, const VerifySettings& vs, int threads = 0) {
  std::vector<Check> out;
  auto rng_for = [&](const char* path) { return CounterRng(derive_seed(root, path)); };

  // core_geometry
  {
    auto rng = rng_for("verify/joint_distance");
    double worst = 0.0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      const Index j = detail::uniform_index(rng, 1, 6);
      std::vector<Vector> p, q;
      for (Index c = 0; c < j; ++c) {
        const Index d = detail::uniform_index(rng, 1, 8);
        p.push_back(detail::gaussian_matrix(rng, d, 1));
        q.push_back(detail::gaussian_matrix(rng, d, 1));
      }
      const double jd = joint_distance(p, q);
      const double oracle = (concat(p) - concat(q)).squaredNorm();
      worst = std::max(worst, std::abs(jd * jd - oracle) / std::max(oracle, 1e-300));
    }
    out.push_back(check_le("core_geometry", "joint_distance_decomposition", worst, 1e-9));
  }
  {
    auto rng = rng_for("verify/paths");
    Index violations = 0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      const Index j = detail::uniform_index(rng, 2, 5);
      std::vector<Index> dims;
      for (Index c = 0; c < j; ++c) dims.push_back(detail::uniform_index(rng, 1, 4));
      Index total = 0;
      for (const Index d : dims) total += d;
      const Polyline joint{detail::gaussian_matrix(rng, detail::uniform_index(rng, 2, 60), total)};
      const double l = path_length(joint);
      double sum = 0.0;
      for (const auto& c : split(joint, dims)) sum += path_length(c);
      const double tol = 1e-12 * sum;
      if (sum / std::sqrt(static_cast<double>(j)) > l + tol || l > sum + tol) ++violations;
    }
    out.push_back(check_le("core_geometry", "path_length_sandwich", static_cast<double>(violations), 0.0));
  }
  {
    auto rng = rng_for("verify/geodesic_scaling");
    const ParametricManifold helix = make_helix_pair().joint();
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double a = 0.1 + 6.0 * rng.uniform(), b = 0.1 + 6.0 * rng.uniform();
      if (a == b) continue;
      const double geo = parameter_geodesic(helix, Vector::Constant(1, a), Vector::Constant(1, b), 10000);
      worst = std::max(worst, std::abs(geo / (std::numbers::sqrt2 * std::abs(a - b)) - 1.0));
    }
    out.push_back(check_le("core_geometry", "isometric_geodesic_scaling", worst, 1e-3));
  }
  {
    auto rng = rng_for("verify/refinement");
    const ParametricManifold curve = make_trig_curve(derive_seed(root, "verify/refinement/curve"));
    Index violations = 0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      const Index n = detail::uniform_index(rng, 3, 30);
      std::vector<double> ts;
      for (Index i = 0; i < n; ++i) ts.push_back(6.2 * rng.uniform() + 0.01);
      std::sort(ts.begin(), ts.end());
      const double extra = ts.front() + (ts.back() - ts.front()) * rng.uniform();
      Polyline before{RowMatrix(n, curve.ambient_dim())};
      for (Index i = 0; i < n; ++i) before.vertices.row(i) = curve(Vector::Constant(1, ts[static_cast<std::size_t>(i)])).transpose();
      auto refined_ts = ts;
      refined_ts.insert(std::upper_bound(refined_ts.begin(), refined_ts.end(), extra), extra);
      Polyline after{RowMatrix(n + 1, curve.ambient_dim())};
      for (Index i = 0; i <= n; ++i) after.vertices.row(i) = curve(Vector::Constant(1, refined_ts[static_cast<std::size_t>(i)])).transpose();
      const double lb = path_length(before), la = path_length(after);
      if (la < lb * (1.0 - 1e-12)) ++violations;
    }
    out.push_back(check_le("core_geometry", "refinement_monotonicity", static_cast<double>(violations), 0.0));
  }

  // manifold_models
  {
    Index mismatches = 0;
    const JointCloud jc = sample_joint(make_helix_pair(), SamplingStrategy::uniform_random(derive_seed(root, "verify/alignment")), 500, threads);
    for (const auto& c : jc.components)
      for (Index i = 0; i < c.params.size(); ++i)
        if (c.params.data()[i] != jc.components.front().params.data()[i]) ++mismatches;
    out.push_back(check_le("manifold_models", "joint_sampling_alignment", static_cast<double>(mismatches), 0.0));
  }
  const ParamBox common_box{Eigen::Vector2d(9.0, 9.0), Eigen::Vector2d(54.0, 54.0)};
  const ParametricManifold round = make_ellipse_manifold(7, 7, 64, {}, common_box);
  const ParametricManifold mid = make_ellipse_manifold(7, 6, 64, {}, common_box);
  const ParametricManifold flat = make_ellipse_manifold(7, 5, 64, {}, common_box);
  {
    ReachOptions opt;
    opt.threads = threads;
    const double t_round = estimate_reach(round, SamplingStrategy::grid(), 100, opt).tau;
    const double t_flat = estimate_reach(flat, SamplingStrategy::grid(), 100, opt).tau;
    out.push_back(check_le("manifold_models", "ellipse_eccentricity_reach_order", t_flat, t_round, "tau(7,5) <= tau(7,7)"));
  }
  {
    const Vector theta = Eigen::Vector2d(31.25, 40.5);
    const Vector a = mid(theta), b = make_ellipse_manifold(7, 6, 64, {}, common_box)(theta);
    out.push_back(check_le("manifold_models", "render_determinism", (a.array() != b.array()).count(), 0.0));
  }

  // reach
  {
    const ParametricManifold circle = make_circle(1.0);
    const PointCloud cloud = sample(circle, SamplingStrategy::grid(), 500, threads);
    const auto frames = tangent_frames(circle, cloud.params, threads);
    ReachOptions opt;
    opt.threads = threads;
    const double base = estimate_reach(cloud, frames, opt).tau;
    double worst = 0.0;
    // powers of two scale every intermediate exactly
    for (const double c : {4.0, 0.5, 0.25}) {
      PointCloud scaled = cloud;
      scaled.points *= c;
      const double tau = estimate_reach(scaled, frames, opt).tau;
      worst = std::max(worst, std::abs(tau - c * base) / (c * base));
    }
    out.push_back(check_le("reach", "reach_scale_equivariance", worst, 0.0));
  }
  auto density = [&](const ParametricManifold& m, double analytic, const char* name) {
    ReachOptions opt;
    opt.threads = threads;
    Index violations = 0;
    double previous = std::numeric_limits<double>::infinity();
    for (const Index s : {250, 500, 1000, 2000, 4000}) {
      const double err = std::abs(estimate_reach(m, SamplingStrategy::grid(), s, opt).tau - analytic);
      if (err > previous + 1e-9) ++violations;
      previous = err;
    }
    out.push_back(check_le("reach", name, static_cast<double>(violations), 0.0));
  };
  density(make_circle(1.0), 1.0, "reach_density_monotone_circle");
  density(make_helix_pair().joint(), 2.0, "reach_density_monotone_helix");
  {
    ReachOptions opt;
    opt.threads = threads;
    Index violations = 0, cases = 0;
    auto run = [&](const JointManifoldSpec& spec, Index count) {
      ++cases;
      if (!verify_cond_jam(spec, count, SamplingStrategy::grid(), opt).holds) ++violations;
    };
    run(make_helix_pair(), 2000);
    run(JointManifoldSpec{{round, mid}}, 100);
    run(JointManifoldSpec{{round, flat}}, 100);
    run(JointManifoldSpec{{mid, flat}}, 100);
    for (std::uint64_t e = 0; e < 10; ++e) {
      JointManifoldSpec spec;
      const Index j = 2 + static_cast<Index>(e % 3);
      for (Index c = 0; c < j; ++c)
        spec.components.push_back(make_trig_curve(derive_seed(derive_seed(root, "verify/trig"), e * 8 + static_cast<std::uint64_t>(c))));
      run(spec, 800);
    }
    out.push_back(check_le("reach", "cond_jam_battery", static_cast<double>(violations), 0.0,
                           std::to_string(cases) + " joint manifolds"));
  }

  // separation_classify
  {
    auto rng = rng_for("verify/separation");
    Index violations = 0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      const Index d = detail::uniform_index(rng, 1, 5);
      PointCloud a, b;
      a.points = detail::gaussian_matrix(rng, detail::uniform_index(rng, 1, 30), d);
      b.points = detail::gaussian_matrix(rng, detail::uniform_index(rng, 1, 30), d, 1.0, 2.0 * rng.uniform());
      a.params.resize(a.points.rows(), 0);
      b.params.resize(b.points.rows(), 0);
      const auto s = separation(a, b, threads);
      if (!(s.delta <= s.hausdorff_forward && s.hausdorff_forward <= s.max_sep && s.delta <= s.hausdorff_backward &&
            s.hausdorff_backward <= s.max_sep))
        ++violations;
    }
    out.push_back(check_le("separation_classify", "separation_chain", static_cast<double>(violations), 0.0));
  }
  {
    auto rng = rng_for("verify/djam");
    Index violations = 0;
    const Index js[] = {2, 3, 5};
    for (Index t = 0; t < vs.random_cases; ++t) {
      std::vector<Index> dims;
      for (Index c = 0; c < js[t % 3]; ++c) dims.push_back(detail::uniform_index(rng, 1, 4));
      const JointCloud a = detail::random_joint_cloud(rng, dims, detail::uniform_index(rng, 2, 25), 0.0);
      const JointCloud b = detail::random_joint_cloud(rng, dims, detail::uniform_index(rng, 2, 25), 1.5 * rng.uniform());
      for (const auto& c : verify_djam(a, b, 1e-9, threads).checks) violations += c.holds ? 0 : 1;
    }
    out.push_back(check_le("separation_classify", "djam_inequalities", static_cast<double>(violations), 0.0));
  }
  const auto [seg_a, seg_b] = detail::parallel_segment_clouds(4, 50, 1.0);
  {
    const auto [a1, b1] = detail::parallel_segment_clouds(1, 50, 1.0);
    const NoiseModel nm{0.3, 0.49, 0, NormConvention::MeanNorm, 4.0};
    Index errors = 0;
    const Index trials = std::min<Index>(vs.trials, 10000);
    for (Index t = 0; t < trials; ++t) {
      const TrialDraw d = draw_trial(a1, nm, derive_seed(root, "verify/zero_error"), static_cast<std::uint64_t>(t));
      const Vector y = a1.components[0].points.row(d.sample).transpose() + d.noise[0];
      if (classify(y, a1.components[0].points, b1.components[0].points).label != ClassLabel::A) ++errors;
    }
    out.push_back(check_le("separation_classify", "zero_error_regime", static_cast<double>(errors), 0.0,
                           "||n|| <= 0.49 < delta/2 = 0.5"));
  }
  {
    const NoiseModel nm{0.4, 1.0, 0, NormConvention::MeanNorm, 4.0};
    const auto r = run_classification_experiment(seg_a, seg_b, nm, 1000, derive_seed(root, "verify/bounds"), threads);
    double margin = std::numeric_limits<double>::infinity();
    bool strict = true, any = false;
    for (std::size_t k = 0; k < r.c_k.size(); ++k)
      if (r.hypothesis_ok[k]) {
        any = true;
        margin = std::min(margin, r.c_star - r.c_k[k]);
        strict = strict && r.c_strict[k];
      }
    out.push_back(check_ge("separation_classify", "bound_ordering", any ? margin : -1.0, 0.0,
                           strict ? "strict" : "not strict"));
  }
  {
    auto rng = rng_for("verify/scale");
    Index violations = 0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      const Index d = detail::uniform_index(rng, 1, 4);
      const RowMatrix a = detail::gaussian_matrix(rng, 20, d), b = detail::gaussian_matrix(rng, 20, d, 1.0, 0.5);
      const Vector y = detail::gaussian_matrix(rng, d, 1);
      const auto base = classify(y, a, b).label;
      for (const double c : {0.5, 3.0, 7.25})
        if (classify(Vector(c * y), RowMatrix(c * a), RowMatrix(c * b)).label != base) ++violations;
    }
    out.push_back(check_le("separation_classify", "classifier_scale_invariance", static_cast<double>(violations), 0.0));
  }

  // isomap
  {
    auto rng = rng_for("verify/geodesics");
    double triangle = 0.0, mismatch = 0.0;
    for (Index t = 0; t < 10; ++t) {
      // integer weights: sums are exact, so the comparison is exact
      const Index s = detail::uniform_index(rng, 5, 50);
      std::vector<std::pair<IndexPair, double>> edges;
      for (Index i = 1; i < s; ++i) edges.push_back({{detail::uniform_index(rng, 0, i - 1), i}, static_cast<double>(detail::uniform_index(rng, 1, 9))});
      for (Index e = 0; e < s; ++e) {
        const Index i = detail::uniform_index(rng, 0, s - 1), j = detail::uniform_index(rng, 0, s - 1);
        if (i != j) edges.push_back({{i, j}, static_cast<double>(detail::uniform_index(rng, 1, 9))});
      }
      const NeighborhoodGraph g = graph_from_edges(s, edges);
      const GeodesicMatrix gm = geodesic_matrix(g, threads);
      mismatch = std::max(mismatch, (gm.distances - detail::floyd_warshall(g)).cwiseAbs().maxCoeff());
      for (Index i = 0; i < s; ++i)
        for (Index j = 0; j < s; ++j)
          for (Index k = 0; k < s; ++k)
            triangle = std::max(triangle, gm.distances(i, k) - gm.distances(i, j) - gm.distances(j, k));
    }
    out.push_back(check_le("isomap", "geodesic_triangle_inequality", triangle, 0.0));
    out.push_back(check_le("isomap", "geodesic_matches_oracle", mismatch, 0.0));
  }
  {
    auto rng = rng_for("verify/mds");
    double worst = 0.0;
    for (Index t = 0; t < 10; ++t) {
      const Index l = detail::uniform_index(rng, 1, 3);
      const RowMatrix pts = detail::gaussian_matrix(rng, 30, l, 2.0);
      const DistanceMatrix d = pairwise_distances(pts, threads);
      const Embedding e = classical_mds(d, l);
      worst = std::max(worst, (pairwise_distances(e.coords, threads) - d).cwiseAbs().maxCoeff());
    }
    out.push_back(check_le("isomap", "mds_exact_recovery", worst, 1e-9));
  }
  {
    const JointManifoldSpec helix = make_helix_pair();
    const JointCloud jc = sample_joint(helix, SamplingStrategy::grid(), 400, threads);
    const NeighborhoodGraph g = build_graph(concat(jc), GraphRule::knn(8), threads);
    std::vector<GeodesicOracle> comps;
    for (const auto& c : helix.components) comps.push_back(parameter_geodesic_oracle(c, jc.components[0].params, 2000));
    const auto r = check_joint_rho(jc, g, comps, parameter_geodesic_oracle(helix.joint(), jc.components[0].params, 2000));
    out.push_back(check_le("isomap", "joint_rho_sandwich", static_cast<double>(r.violations), 0.0,
                           std::to_string(r.edges) + " edges"));
  }
  {
    const JointManifoldSpec spec = make_copies(make_circle(1.0), 4);
    const NoiseModel nm{0.1, 0.04, derive_seed(root, "verify/jml"), NormConvention::MeanSquaredNorm, 4.0};
    const double t1 = 1.0, t2 = 1.0 + std::numbers::pi / 3.0;  // chord 1
    const auto r = jml_concentration(spec, nm, Vector::Constant(1, t1), Vector::Constant(1, t2), std::max<Index>(vs.trials, 1000), 0.2, threads);
    const double z = std::abs(r.mean_squared_distance - r.expected_squared_distance) / r.bias_standard_error;
    out.push_back(check_le("isomap", "jml_ratio_bias", z, 4.0, "z-score of mean ||s-r||^2 against ||p-q||^2 + 2 J sigma^2"));
  }

  // fusion
  {
    auto rng = rng_for("verify/fusion_identity");
    double worst = 0.0;
    for (Index t = 0; t < vs.random_cases; ++t) {
      std::vector<Index> dims;
      const Index j = detail::uniform_index(rng, 1, 6);
      for (Index c = 0; c < j; ++c) dims.push_back(detail::uniform_index(rng, 1, 20));
      const auto op = ProjectionOperator::make(detail::uniform_index(rng, 1, 30), dims, rng());
      std::vector<Vector> xs, locals;
      for (Index c = 0; c < j; ++c) {
        xs.push_back(detail::gaussian_matrix(rng, dims[static_cast<std::size_t>(c)], 1));
        locals.push_back(local_project(op.block(c), xs.back()));
      }
      const Vector full = op.full() * concat(xs);
      worst = std::max(worst, (fuse(locals) - full).cwiseAbs().maxCoeff() / std::max(1.0, full.cwiseAbs().maxCoeff()));
    }
    out.push_back(check_le("fusion", "fusion_identity", worst, 1e-12));
  }
  {
    const JointCloud helix = sample_joint(make_helix_pair(), SamplingStrategy::grid(), 500, threads);
    DistortionOptions opt;
    opt.pair_seed = derive_seed(root, "verify/distortion/pairs");
    opt.threads = threads;
    const auto sweep = distortion_sweep(helix, {8, 32, 128, 512}, 20, derive_seed(root, "verify/distortion"), opt);
    Index violations = 0;
    std::string detail_text;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      if (i > 0 && sweep[i].spread() > sweep[i - 1].spread()) ++violations;
      if (i > 0 && sweep[i].median_epsilon_hat > sweep[i - 1].median_epsilon_hat) ++violations;
      detail_text += (i ? "; M=" : "M=") + std::to_string(sweep[i].measurements) + " spread " +
                     detail::format_double(sweep[i].spread());
    }
    out.push_back(check_le("fusion", "distortion_concentration", static_cast<double>(violations), 0.0, detail_text));
  }
  {
    const NoiseModel nm{0.4, 1.0, 0, NormConvention::MeanNorm, 4.0};
    const Index mc = calibrated_measurements(1, seg_a.num_components(), seg_a.joint_dim());
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 5; ++i) {
      const auto op = ProjectionOperator::make(mc, seg_a.component_dims(), derive_seed(derive_seed(root, "verify/downstream"), i));
      worst = std::max(worst, projected_classification(seg_a, seg_b, nm, vs.trials, derive_seed(root, "verify/downstream/trials"), op, threads).shift());
    }
    out.push_back(check_le("fusion", "downstream_preservation", worst, 0.02));
  }

  // cli_harness
  {
    const NoiseModel nm{0.4, 1.0, 0, NormConvention::MeanNorm, 4.0};
    const auto r1 = run_classification_experiment(seg_a, seg_b, nm, 2000, derive_seed(root, "verify/replay"), threads);
    const auto r2 = run_classification_experiment(seg_a, seg_b, nm, 2000, derive_seed(root, "verify/replay"), 1);
    const bool same = to_json(r1).dump() == to_json(r2).dump();
    out.push_back(check_le("cli_harness", "replay_determinism", same ? 0.0 : 1.0, 0.0, "classification rerun with a different thread count"));
  }
  {
    std::map<std::string, int> seen;
    for (const auto& c : out) ++seen[c.name];
    Index missing = 0;
    for (const auto& n : verify_all_check_names())
      if (n != "manifest_completeness" && seen[n] != 1) ++missing;
    missing += static_cast<Index>(seen.size()) + 1 - static_cast<Index>(verify_all_check_names().size());
    out.push_back(check_le("cli_harness", "manifest_completeness", static_cast<double>(std::abs(missing)), 0.0));
  }
  return out;
}

inline void run_verify_all(const ExperimentConfig& cfg, RunManifest& m, const OutputDir& /*out*/) {
  ObjectReader r(detail::block(cfg, "verify"), "verify");
  VerifySettings vs;
  vs.trials = r.get("trials", vs.trials);
  vs.random_cases = r.get("random_cases", vs.random_cases);
  r.finish();
  if (cfg.trials) vs.trials = *cfg.trials;
  if (vs.trials < 1000 || vs.random_cases < 1) throw ConfigError("verify: trials >= 1000 and random_cases >= 1 required");
  m.checks = verify_all(derive_seed(cfg.seed, "verify"), vs, cfg.threads);
  m.report = {{"trials", vs.trials}, {"random_cases", vs.random_cases}, {"checks", m.checks.size()}};
}

/// Runs the configured experiment; writes manifest.json, checks.csv and
/// experiment outputs when cfg.out is set.
inline RunManifest run(const ExperimentConfig& cfg) {
  RunManifest m;
  m.experiment = cfg.experiment;
  m.seed = cfg.seed;
  m.config_hash = config_hash(cfg);
  m.started_at = utc_now();
  const OutputDir out(cfg.out);
  if (cfg.experiment == "helix") run_helix(cfg, m, out);
  else if (cfg.experiment == "reach") run_reach(cfg, m, out);
  else if (cfg.experiment == "classify") run_classify(cfg, m, out);
  else if (cfg.experiment == "fuse") run_fuse(cfg, m, out);
  else if (cfg.experiment == "ellipse-learn") run_ellipse_learn(cfg, m, out);
  else if (cfg.experiment == "isomap") run_isomap_experiment(cfg, m, out);
  else if (cfg.experiment == "sample") run_sample(cfg, m, out);
  else if (cfg.experiment == "verify-all") run_verify_all(cfg, m, out);
  else throw ConfigError("experiment: unknown experiment '" + cfg.experiment + "'");
  m.finished_at = utc_now();
  if (out.enabled()) {
    out.write_json("manifest.json", to_json(m));
    auto f = out.open("checks.csv");
    write_checks_csv(f, m.checks);
  }
  return m;
}

}  // namespace jointfold
