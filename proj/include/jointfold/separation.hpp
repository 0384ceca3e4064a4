#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "jointfold/core_geometry.hpp"
#include "jointfold/manifold_models.hpp"
#include "jointfold/rng.hpp"

namespace jointfold {

/// Minimum separation, both directed Hausdorff distances and maximum
/// separation between two finite clouds, with witness index pairs (a, b).
struct SeparationReport {
  double delta = 0.0;
  double hausdorff_forward = 0.0;   // D(A, B) = max_a min_b
  double hausdorff_backward = 0.0;  // D(B, A)
  double max_sep = 0.0;
  IndexPair delta_witness{-1, -1};
  IndexPair forward_witness{-1, -1};
  IndexPair backward_witness{-1, -1};
  IndexPair max_witness{-1, -1};
};

/// Exact brute force over all |A| x |B| pairs.
inline SeparationReport separation(const PointCloud& a, const PointCloud& b, int threads = 0) {
  a.validate();
  b.validate();
  if (a.ambient_dim() != b.ambient_dim())
    throw InputError("separation: dimension " + detail::dims(a.ambient_dim(), b.ambient_dim()));
  const Eigen::MatrixXd d = cross_distances(a.points, b.points, threads);
  SeparationReport r;
  r.delta = std::numeric_limits<double>::infinity();
  r.max_sep = -1.0;
  r.hausdorff_forward = -1.0;
  r.hausdorff_backward = -1.0;
  for (Index i = 0; i < d.rows(); ++i) {
    double row_min = std::numeric_limits<double>::infinity();
    Index row_arg = -1;
    for (Index j = 0; j < d.cols(); ++j) {
      const double v = d(i, j);
      if (v < r.delta) r.delta = v, r.delta_witness = {i, j};
      if (v > r.max_sep) r.max_sep = v, r.max_witness = {i, j};
      if (v < row_min) row_min = v, row_arg = j;
    }
    if (row_min > r.hausdorff_forward) r.hausdorff_forward = row_min, r.forward_witness = {i, row_arg};
  }
  for (Index j = 0; j < d.cols(); ++j) {
    double col_min = std::numeric_limits<double>::infinity();
    Index col_arg = -1;
    for (Index i = 0; i < d.rows(); ++i)
      if (d(i, j) < col_min) col_min = d(i, j), col_arg = i;
    if (col_min > r.hausdorff_backward) r.hausdorff_backward = col_min, r.backward_witness = {col_arg, j};
  }
  return r;
}

// Joint separation bounds --------------------------------------------------------

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline BoundCheck make_bound(std::string name, double lhs, double rhs, double tolerance) {
  return {std::move(name), lhs, rhs, lhs <= rhs + tolerance * std::max(1.0, std::abs(rhs))};
}

struct DjamReport {
  std::vector<SeparationReport> components;
  SeparationReport joint;
  /// jms lower/upper, jhs lower/upper, jmaxs lower/upper, in squared form.
  std::vector<BoundCheck> checks;

  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds; });
  }
};

/// Component and joint separations and the six squared-distance sandwiches
/// relating them.
inline DjamReport verify_djam(const JointCloud& joint_a, const JointCloud& joint_b,
                              double tolerance = 1e-9, int threads = 0) {
  joint_a.validate();
  joint_b.validate();
  if (joint_a.component_dims() != joint_b.component_dims())
    throw InputError("verify_djam: joint clouds differ in J or component dimensions");
  DjamReport r;
  for (std::size_t j = 0; j < joint_a.components.size(); ++j)
    r.components.push_back(separation(joint_a.components[j], joint_b.components[j], threads));
  r.joint = separation(concat(joint_a), concat(joint_b), threads);

  const std::size_t count = r.components.size();
  double sum_delta2 = 0.0, sum_max2 = 0.0;
  for (const auto& c : r.components) {
    sum_delta2 += c.delta * c.delta;
    sum_max2 += c.max_sep * c.max_sep;
  }
  double jms_upper = std::numeric_limits<double>::infinity();
  double jhs_lower = 0.0, jmaxs_lower = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& c = r.components[k];
    const double others_max2 = sum_max2 - c.max_sep * c.max_sep;
    const double others_delta2 = sum_delta2 - c.delta * c.delta;
    jms_upper = std::min(jms_upper, c.delta * c.delta + others_max2);
    jhs_lower = std::max(jhs_lower, c.hausdorff_forward * c.hausdorff_forward + others_delta2);
    jmaxs_lower = std::max(jmaxs_lower, c.max_sep * c.max_sep + others_delta2);
  }
  const double d2 = r.joint.delta * r.joint.delta;
  const double h2 = r.joint.hausdorff_forward * r.joint.hausdorff_forward;
  const double m2 = r.joint.max_sep * r.joint.max_sep;
  r.checks.push_back(make_bound("jms_lower", sum_delta2, d2, tolerance));
  r.checks.push_back(make_bound("jms_upper", d2, jms_upper, tolerance));
  r.checks.push_back(make_bound("jhs_lower", jhs_lower, h2, tolerance));
  r.checks.push_back(make_bound("jhs_upper", h2, sum_max2, tolerance));
  r.checks.push_back(make_bound("jmaxs_lower", jmaxs_lower, m2, tolerance));
  r.checks.push_back(make_bound("jmaxs_upper", m2, sum_max2, tolerance));
  return r;
}

// Nearest-manifold classifier ----------------------------------------------------

enum class ClassLabel { A, B };

struct Classification {
  ClassLabel label = ClassLabel::A;
  double distance_a = 0.0;
  double distance_b = 0.0;
  /// Equal distances; resolved toward A.
  bool tie = false;
};

/// Distance from y to the nearest sample of `cloud`.
template <class Derived>
double distance_to_cloud(const Eigen::MatrixBase<Derived>& y, const RowMatrix& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < cloud.rows(); ++i) best = std::min(best, euclidean_distance(y, cloud.row(i)));
  return best;
}

template <class Derived>
Classification classify(const Eigen::MatrixBase<Derived>& y, const RowMatrix& a, const RowMatrix& b) {
  if (y.size() != a.cols() || y.size() != b.cols())
    throw InputError("classify: observation dimension does not match the clouds");
  if (a.rows() == 0 || b.rows() == 0) throw InputError("classify: empty cloud");
  Classification c;
  c.distance_a = distance_to_cloud(y, a);
  c.distance_b = distance_to_cloud(y, b);
  c.tie = c.distance_a == c.distance_b;
  c.label = c.distance_b < c.distance_a ? ClassLabel::B : ClassLabel::A;
  return c;
}

inline Classification classify(const Vector& y, const PointCloud& a, const PointCloud& b) {
  return classify(y, a.points, b.points);
}

/// exp(-2 J lambda^2 / epsilon^4): bound on P(||n||^2 > J (sigma^2 + lambda)).
inline double hoeffding_tail(Index components, double sigma, double epsilon, double lambda) {
  if (!(lambda > 0.0)) throw InputError("hoeffding_tail: lambda must be positive");
  if (!(epsilon > 0.0)) throw InputError("hoeffding_tail: epsilon must be positive");
  if (components < 1) throw InputError("hoeffding_tail: J must be >= 1");
  if (!(sigma >= 0.0)) throw InputError("hoeffding_tail: sigma must be nonnegative");
  const double e4 = epsilon * epsilon * epsilon * epsilon;
  return std::exp(-2.0 * static_cast<double>(components) * lambda * lambda / e4);
}

// Monte Carlo classification -------------------------------------------------------

/// One trial: a source sample index and one noise vector per component.
struct TrialDraw {
  Index sample = 0;
  std::vector<Vector> noise;
};

inline TrialDraw draw_trial(const JointCloud& source, const NoiseModel& nm, std::uint64_t seed,
                            std::uint64_t trial) {
  TrialDraw draw;
  CounterRng rng(derive_seed(derive_seed(seed, "classify/sample"), trial));
  draw.sample = static_cast<Index>(rng() % static_cast<std::uint64_t>(source.size()));
  NoiseModel stream = nm;
  stream.seed = derive_seed(seed, "classify/noise");
  const auto j_count = static_cast<std::uint64_t>(source.num_components());
  for (std::uint64_t j = 0; j < j_count; ++j)
    draw.noise.push_back(noise_vector(stream, source.components[j].ambient_dim(), trial * j_count + j));
  return draw;
}

/// Largest nearest-neighbour distance inside a cloud (sampling coarseness).
inline double fill_radius(const PointCloud& cloud, int threads = 0) {
  if (cloud.size() < 2) return 0.0;
  const DistanceMatrix d = pairwise_distances(cloud.points, threads);
  double r = 0.0;
  for (Index i = 0; i < d.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < d.cols(); ++j)
      if (j != i) nearest = std::min(nearest, d(i, j));
    r = std::max(r, nearest);
  }
  return r;
}

struct ClassifierBoundReport {
  Index num_components = 0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double delta_star = 0.0;
  std::vector<double> delta_k;
  double c_star = 0.0;
  std::vector<double> c_k;
  double bound_joint = 1.0;
  std::vector<double> bound_component;
  Index errors_joint = 0;
  std::vector<Index> errors_component;
  double empirical_error_joint = 0.0;
  std::vector<double> empirical_error_component;
  Index trials = 0;
  std::uint64_t seed = 0;
  double fill_radius_a = 0.0;
  double fill_radius_b = 0.0;

  // hypothesis flags
  bool joint_hypothesis = false;          // delta*^2 / 4J - sigma^2 > 0
  std::vector<bool> sigma_ok;             // sigma <= delta_k / 2
  std::vector<bool> within_joint_share;   // delta_k <= delta* / sqrt(J)
  std::vector<bool> within_others_mean;   // delta_k^2 <= sum_{j!=k} delta_j^2 / (J-1)
  std::vector<bool> hypothesis_ok;        // sigma_ok && (joint share || others mean)
  std::vector<bool> c_order;              // c* >= c_k
  std::vector<bool> c_strict;             // c* > c_k

  std::vector<BoundCheck> checks;         // asserted only where hypotheses hold
  std::vector<std::string> skipped;       // assertions skipped, with reason

  bool joint_le_mean_component() const {
    double mean = 0.0;
    for (const double e : empirical_error_component) mean += e;
    mean /= static_cast<double>(empirical_error_component.size());
    return empirical_error_joint <= mean;
  }
  bool all_hold() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds; });
  }
};

/// Classifies noisy points drawn from joint_a against (joint_a, joint_b), both
/// jointly and per component with the same noise draws, and evaluates the
/// exponential error bounds.
inline ClassifierBoundReport run_classification_experiment(const JointCloud& joint_a, const JointCloud& joint_b,
                                                           const NoiseModel& nm, Index trials,
                                                           std::uint64_t seed, int threads = 0) {
  joint_a.validate();
  joint_b.validate();
  nm.validate();
  if (nm.convention != NormConvention::MeanNorm)
    throw ConfigError("classification bounds use the mean-norm noise convention");
  if (joint_a.component_dims() != joint_b.component_dims())
    throw InputError("classification: joint clouds differ in J or component dimensions");
  if (trials < 1) throw ConfigError("classification: trials must be >= 1");

  ClassifierBoundReport r;
  const Index j_count = joint_a.num_components();
  const auto jd = static_cast<double>(j_count);
  r.num_components = j_count;
  r.sigma = nm.sigma;
  r.epsilon = nm.epsilon;
  r.trials = trials;
  r.seed = seed;

  const PointCloud a_star = concat(joint_a), b_star = concat(joint_b);
  r.delta_star = separation(a_star, b_star, threads).delta;
  for (Index k = 0; k < j_count; ++k)
    r.delta_k.push_back(separation(joint_a.components[k], joint_b.components[k], threads).delta);
  r.fill_radius_a = fill_radius(a_star, threads);
  r.fill_radius_b = fill_radius(b_star, threads);

  const double s2 = nm.sigma * nm.sigma;
  const double e4 = std::pow(nm.epsilon, 4);
  const double joint_margin = r.delta_star * r.delta_star / (4.0 * jd) - s2;
  r.joint_hypothesis = joint_margin > 0.0;
  r.c_star = jd * joint_margin * joint_margin;
  r.bound_joint = r.joint_hypothesis ? std::exp(-2.0 * r.c_star / e4) : 1.0;
  double sum_delta2 = 0.0;
  for (const double d : r.delta_k) sum_delta2 += d * d;
  for (Index k = 0; k < j_count; ++k) {
    const double dk = r.delta_k[static_cast<std::size_t>(k)];
    const double margin = dk * dk / 4.0 - s2;
    const double ck = margin * margin;
    r.c_k.push_back(ck);
    r.bound_component.push_back(margin > 0.0 ? std::exp(-2.0 * ck / e4) : 1.0);
    r.sigma_ok.push_back(nm.sigma <= dk / 2.0 && margin > 0.0);
    r.within_joint_share.push_back(dk <= r.delta_star / std::sqrt(jd) * (1.0 + 1e-12));
    r.within_others_mean.push_back(
        j_count == 1 ? true : dk * dk <= (sum_delta2 - dk * dk) / (jd - 1.0) * (1.0 + 1e-12));
    r.hypothesis_ok.push_back(r.sigma_ok.back() && (r.within_joint_share.back() || r.within_others_mean.back()));
    r.c_order.push_back(r.c_star >= ck * (1.0 - 1e-12));
    r.c_strict.push_back(r.c_star > ck);
  }

  // per-trial outcome bits, then exact integer reduction
  std::vector<std::uint32_t> outcome(static_cast<std::size_t>(trials), 0);
  parallel_for(trials, threads, [&](std::ptrdiff_t t) {
    const TrialDraw draw = draw_trial(joint_a, nm, seed, static_cast<std::uint64_t>(t));
    std::uint32_t bits = 0;
    Vector y_star(a_star.ambient_dim());
    Index offset = 0;
    for (Index k = 0; k < j_count; ++k) {
      const auto& comp = joint_a.components[static_cast<std::size_t>(k)];
      const Vector y = comp.points.row(draw.sample).transpose() + draw.noise[static_cast<std::size_t>(k)];
      y_star.segment(offset, y.size()) = y;
      offset += y.size();
      if (classify(y, comp.points, joint_b.components[static_cast<std::size_t>(k)].points).label == ClassLabel::B)
        bits |= 1u << (k + 1);
    }
    if (classify(y_star, a_star.points, b_star.points).label == ClassLabel::B) bits |= 1u;
    outcome[static_cast<std::size_t>(t)] = bits;
  });
  r.errors_component.assign(static_cast<std::size_t>(j_count), 0);
  for (const auto bits : outcome) {
    r.errors_joint += bits & 1u;
    for (Index k = 0; k < j_count; ++k) r.errors_component[static_cast<std::size_t>(k)] += (bits >> (k + 1)) & 1u;
  }
  const auto td = static_cast<double>(trials);
  r.empirical_error_joint = static_cast<double>(r.errors_joint) / td;
  for (const auto e : r.errors_component) r.empirical_error_component.push_back(static_cast<double>(e) / td);

  if (r.joint_hypothesis) {
    r.checks.push_back(make_bound("joint_error_le_bound", r.empirical_error_joint, r.bound_joint, 0.0));
  } else {
    r.skipped.push_back("joint_error_le_bound: sigma^2 >= delta*^2 / 4J");
  }
  for (Index k = 0; k < j_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const std::string tag = "[" + std::to_string(k) + "]";
    if (r.hypothesis_ok[ks]) {
      r.checks.push_back(make_bound("component_error_le_bound" + tag, r.empirical_error_component[ks],
                                    r.bound_component[ks], 0.0));
      r.checks.push_back(make_bound("c_k_le_c_star" + tag, r.c_k[ks], r.c_star, 1e-12));
    } else {
      r.skipped.push_back("component" + tag + ": hypotheses of the bound do not hold");
    }
  }
  return r;
}

}  // namespace jointfold
