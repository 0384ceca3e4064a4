#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "jointfold/core_geometry.hpp"
#include "jointfold/manifold_models.hpp"
#include "jointfold/rng.hpp"

namespace jointfold {

/// Reach tau of a sampled manifold (condition number 1/tau).
struct ReachEstimate {
  /// False when the manifold is declared flat (Unbounded).
  bool bounded = false;
  /// Estimated reach; +inf when unbounded.
  double tau = std::numeric_limits<double>::infinity();
  /// Smallest pair value even when it exceeded the unbounded cap.
  double raw_min = std::numeric_limits<double>::infinity();
  Index num_pairs_evaluated = 0;
  IndexPair argmin_pair{-1, -1};

  double condition_number() const { return bounded ? 1.0 / tau : 0.0; }
};

struct ReachOptions {
  /// Unbounded when tau exceeds this multiple of the cloud diameter.
  double unbounded_factor = 1e6;
  /// All base points are used up to this size, a seeded subset beyond.
  Index max_base_points = 4000;
  std::uint64_t subsample_seed = 0;
  int threads = 0;
};

/// tau = min over ordered pairs (p, q) of ||q - p||^2 / (2 dist(q - p, T_p)).
///
/// tangents[i] is an orthonormal N x K basis of the tangent space at point i.
/// Pairs whose difference lies in T_p contribute nothing (infinite value).
inline ReachEstimate estimate_reach(const PointCloud& cloud, std::span<const RowMatrix> tangents,
                                    const ReachOptions& options = {}) {
  cloud.validate();
  const Index s = cloud.size();
  if (s < 2) throw InputError("estimate_reach needs at least 2 points");
  if (static_cast<Index>(tangents.size()) != s)
    throw InputError("estimate_reach: one tangent frame per point required");
  for (const auto& t : tangents)
    if (t.rows() != cloud.ambient_dim())
      throw InputError("estimate_reach: tangent frame dimension mismatch");

  std::vector<Index> base(static_cast<std::size_t>(s));
  std::iota(base.begin(), base.end(), Index{0});
  if (s > options.max_base_points) {
    // deterministic partial Fisher-Yates, then restore index order
    CounterRng rng(derive_seed(options.subsample_seed, "reach/subsample"));
    for (Index i = 0; i < options.max_base_points; ++i) {
      const auto j = i + static_cast<Index>(rng() % static_cast<std::uint64_t>(s - i));
      std::swap(base[static_cast<std::size_t>(i)], base[static_cast<std::size_t>(j)]);
    }
    base.resize(static_cast<std::size_t>(options.max_base_points));
    std::sort(base.begin(), base.end());
  }

  struct Best {
    double value = std::numeric_limits<double>::infinity();
    Index q = -1;
  };
  std::vector<Best> best(base.size());
  std::vector<double> farthest(base.size(), 0.0);
  parallel_for(static_cast<std::ptrdiff_t>(base.size()), options.threads, [&](std::ptrdiff_t b) {
    const Index p = base[static_cast<std::size_t>(b)];
    const RowMatrix& frame = tangents[static_cast<std::size_t>(p)];
    Vector v(cloud.ambient_dim()), residual(cloud.ambient_dim()), along(frame.cols());
    Best local;
    double far = 0.0;
    for (Index q = 0; q < s; ++q) {
      if (q == p) continue;
      v = (cloud.points.row(q) - cloud.points.row(p)).transpose();
      const double n2 = v.squaredNorm();
      far = std::max(far, n2);
      along.noalias() = frame.transpose() * v;
      residual = v;
      residual.noalias() -= frame * along;
      const double normal = residual.norm();
      if (!(normal > 0.0)) continue;
      const double value = n2 / (2.0 * normal);
      if (value < local.value) local = {value, q};
    }
    best[static_cast<std::size_t>(b)] = local;
    farthest[static_cast<std::size_t>(b)] = far;
  });

  ReachEstimate est;
  est.num_pairs_evaluated = static_cast<Index>(base.size()) * (s - 1);
  double diameter2 = 0.0;
  for (std::size_t b = 0; b < base.size(); ++b) {
    diameter2 = std::max(diameter2, farthest[b]);
    // strict < keeps the lowest (p, q) on ties
    if (best[b].value < est.raw_min) {
      est.raw_min = best[b].value;
      est.argmin_pair = {base[b], best[b].q};
    }
  }
  const double diameter = std::sqrt(diameter2);
  if (std::isfinite(est.raw_min) && est.raw_min <= options.unbounded_factor * diameter) {
    est.bounded = true;
    est.tau = est.raw_min;
  }
  return est;
}

/// Samples m and estimates its reach with generator tangent frames.
inline ReachEstimate estimate_reach(const ParametricManifold& m, SamplingStrategy strategy,
                                    Index count, const ReachOptions& options = {}) {
  const PointCloud cloud = sample(m, strategy, count, options.threads);
  const auto frames = tangent_frames(m, cloud.params, options.threads);
  return estimate_reach(cloud, frames, options);
}

// Geodesic bound ---------------------------------------------------------------

/// tau (1 - sqrt(1 - 2 d / tau)); valid for d <= tau / 2.
inline double geodesic_upper_bound(double chord, double tau) {
  return tau * (1.0 - std::sqrt(1.0 - 2.0 * chord / tau));
}

struct GeodesicViolation {
  IndexPair pair;
  double chord = 0.0;
  double geodesic = 0.0;
  double bound = 0.0;
};

struct ViolationReport {
  double tau = 0.0;
  Index pairs_checked = 0;
  /// Pairs skipped because chord > tau / 2.
  Index pairs_out_of_range = 0;
  double max_ratio = 0.0;  // geodesic / bound over checked pairs
  std::vector<GeodesicViolation> violations;
};

using GeodesicOracle = std::function<double(Index, Index)>;

/// Checks d_M(p, q) <= tau (1 - sqrt(1 - 2d/tau)) for pairs with d <= tau/2.
/// num_pairs = 0 checks every unordered pair; otherwise pairs are drawn by seed.
inline ViolationReport check_geodesic_bound(const PointCloud& cloud, double tau,
                                            const GeodesicOracle& geodesic, double relative_slack = 1e-3,
                                            Index num_pairs = 0, std::uint64_t seed = 0) {
  cloud.validate();
  if (!(tau > 0.0)) throw InputError("check_geodesic_bound needs tau > 0");
  ViolationReport report;
  report.tau = tau;
  auto visit = [&](Index i, Index j) {
    const double chord = euclidean_distance(cloud.points.row(i), cloud.points.row(j));
    if (chord > tau / 2.0) {
      ++report.pairs_out_of_range;
      return;
    }
    const double geo = geodesic(i, j);
    const double bound = geodesic_upper_bound(chord, tau);
    ++report.pairs_checked;
    if (bound > 0.0) report.max_ratio = std::max(report.max_ratio, geo / bound);
    if (geo > bound * (1.0 + relative_slack) + 1e-12) report.violations.push_back({{i, j}, chord, geo, bound});
  };
  const Index s = cloud.size();
  if (num_pairs == 0) {
    for (Index i = 0; i < s; ++i)
      for (Index j = i + 1; j < s; ++j) visit(i, j);
  } else {
    CounterRng rng(derive_seed(seed, "reach/geodesic_pairs"));
    for (Index t = 0; t < num_pairs; ++t) {
      const auto i = static_cast<Index>(rng() % static_cast<std::uint64_t>(s));
      auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(s - 1));
      if (j >= i) ++j;
      visit(std::min(i, j), std::max(i, j));
    }
  }
  return report;
}

/// Oracle for curves and flat parameterizations: polyline length of the
/// image of the parameter segment between the two samples.
inline GeodesicOracle parameter_geodesic_oracle(const ParametricManifold& m, const RowMatrix& params,
                                                Index vertices = 10000) {
  return [m, params, vertices](Index i, Index j) {
    return parameter_geodesic(m, params.row(i).transpose(), params.row(j).transpose(), vertices);
  };
}

// Joint condition number -------------------------------------------------------

struct CondJamReport {
  std::vector<ReachEstimate> components;
  ReachEstimate joint;
  /// min_j tau_j (+inf if every component is unbounded).
  double min_component_tau = 0.0;
  double max_component_tau = 0.0;
  double relative_slack = 0.03;
  /// tau* >= min_j tau_j - slack * min_j tau_j.
  bool holds = false;
  /// Observation only: tau* >= max_j tau_j.
  bool better_than_best = false;
};

/// Estimates each component reach and the joint reach on one shared sampling.
inline CondJamReport verify_cond_jam(const JointManifoldSpec& spec, Index count,
                                     SamplingStrategy strategy = SamplingStrategy::grid(),
                                     const ReachOptions& options = {}, double relative_slack = 0.03) {
  spec.validate();
  CondJamReport report;
  report.relative_slack = relative_slack;
  const RowMatrix params = sample_params(spec.components.front().domain(), strategy, count);
  report.min_component_tau = std::numeric_limits<double>::infinity();
  report.max_component_tau = 0.0;
  for (const auto& c : spec.components) {
    const PointCloud cloud = evaluate(c, params, options.threads);
    const auto frames = tangent_frames(c, params, options.threads);
    report.components.push_back(estimate_reach(cloud, frames, options));
    report.min_component_tau = std::min(report.min_component_tau, report.components.back().tau);
    report.max_component_tau = std::max(report.max_component_tau, report.components.back().tau);
  }
  if (spec.components.size() == 1) {
    report.joint = report.components.front();
  } else {
    const ParametricManifold joint = spec.joint();
    const PointCloud cloud = evaluate(joint, params, options.threads);
    const auto frames = tangent_frames(joint, params, options.threads);
    report.joint = estimate_reach(cloud, frames, options);
  }
  const double floor = std::isfinite(report.min_component_tau)
                           ? report.min_component_tau * (1.0 - relative_slack)
                           : std::numeric_limits<double>::infinity();
  report.holds = report.joint.tau >= floor;
  report.better_than_best = report.joint.tau >= report.max_component_tau;
  return report;
}

}  // namespace jointfold
