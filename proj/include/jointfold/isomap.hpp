#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "jointfold/core_geometry.hpp"
#include "jointfold/manifold_models.hpp"
#include "jointfold/reach.hpp"
#include "jointfold/rng.hpp"

namespace jointfold {

// Neighborhood graph -------------------------------------------------------------

struct GraphRule {
  enum class Kind { Knn, Epsilon };
  Kind kind = Kind::Knn;
  Index k = 8;
  double radius = 0.0;

  static GraphRule knn(Index k) { return {Kind::Knn, k, 0.0}; }
  static GraphRule epsilon(double r) { return {Kind::Epsilon, 0, r}; }
};

struct Edge {
  Index to = 0;
  double weight = 0.0;
};

/// Undirected weighted graph; adjacency lists sorted by neighbor index.
struct NeighborhoodGraph {
  std::vector<std::vector<Edge>> adjacency;
  GraphRule rule;
  /// Connected-component label per vertex, numbered by smallest member.
  std::vector<Index> component;
  Index num_components = 0;

  Index num_vertices() const { return static_cast<Index>(adjacency.size()); }
  bool connected() const { return num_components == 1; }
  Index num_edges() const {
    Index e = 0;
    for (const auto& a : adjacency) e += static_cast<Index>(a.size());
    return e / 2;
  }
  /// Each undirected edge once, as (i, j) with i < j, in lexicographic order.
  std::vector<IndexPair> edges() const {
    std::vector<IndexPair> out;
    for (Index i = 0; i < num_vertices(); ++i)
      for (const auto& e : adjacency[static_cast<std::size_t>(i)])
        if (e.to > i) out.emplace_back(i, e.to);
    return out;
  }
  /// Vertices of the largest component (smallest label on ties), ascending.
  std::vector<Index> largest_component() const {
    std::vector<Index> sizes(static_cast<std::size_t>(num_vertices()), 0);
    for (const Index c : component) ++sizes[static_cast<std::size_t>(c)];
    const auto best = static_cast<Index>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<Index> out;
    for (Index i = 0; i < num_vertices(); ++i)
      if (component[static_cast<std::size_t>(i)] == best) out.push_back(i);
    return out;
  }
};

namespace detail {

inline void label_components(NeighborhoodGraph& g) {
  const Index s = g.num_vertices();
  g.component.assign(static_cast<std::size_t>(s), -1);
  g.num_components = 0;
  std::vector<Index> stack;
  for (Index root = 0; root < s; ++root) {
    if (g.component[static_cast<std::size_t>(root)] >= 0) continue;
    ++g.num_components;
    g.component[static_cast<std::size_t>(root)] = root;
    stack.assign(1, root);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (const auto& e : g.adjacency[static_cast<std::size_t>(v)]) {
        auto& label = g.component[static_cast<std::size_t>(e.to)];
        if (label < 0) label = root, stack.push_back(e.to);
      }
    }
  }
}

}  // namespace detail

/// Builds the graph from exact pairwise distances. knn ties are broken by
/// lower index; the knn relation is symmetrized by union.
inline NeighborhoodGraph build_graph(const RowMatrix& points, const GraphRule& rule, int threads = 0) {
  const Index s = points.rows();
  if (s < 2) throw InputError("build_graph needs at least 2 points");
  if (rule.kind == GraphRule::Kind::Knn && (rule.k < 1 || rule.k > s - 1))
    throw InputError("build_graph: k must lie in [1, S-1]");
  if (rule.kind == GraphRule::Kind::Epsilon && !(rule.radius > 0.0))
    throw InputError("build_graph: radius must be positive");
  const DistanceMatrix d = pairwise_distances(points, threads);

  std::vector<std::vector<char>> link(static_cast<std::size_t>(s), std::vector<char>(static_cast<std::size_t>(s), 0));
  if (rule.kind == GraphRule::Kind::Knn) {
    parallel_for(s, threads, [&](std::ptrdiff_t i) {
      std::vector<Index> order;
      order.reserve(static_cast<std::size_t>(s - 1));
      for (Index j = 0; j < s; ++j)
        if (j != i) order.push_back(j);
      std::partial_sort(order.begin(), order.begin() + rule.k, order.end(), [&](Index a, Index b) {
        return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
      });
      for (Index t = 0; t < rule.k; ++t) link[static_cast<std::size_t>(i)][static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = 1;
    });
  } else {
    for (Index i = 0; i < s; ++i)
      for (Index j = 0; j < s; ++j)
        if (i != j && d(i, j) < rule.radius) link[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
  }

  NeighborhoodGraph g;
  g.rule = rule;
  g.adjacency.resize(static_cast<std::size_t>(s));
  for (Index i = 0; i < s; ++i)
    for (Index j = 0; j < s; ++j) {
      if (i == j) continue;
      if (link[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] || link[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
        if (!(d(i, j) > 0.0)) throw InputError("build_graph: duplicate points give a zero-weight edge");
        g.adjacency[static_cast<std::size_t>(i)].push_back({j, d(i, j)});
      }
    }
  detail::label_components(g);
  return g;
}

inline NeighborhoodGraph build_graph(const PointCloud& cloud, const GraphRule& rule, int threads = 0) {
  cloud.validate();
  return build_graph(cloud.points, rule, threads);
}

/// Graph from explicit undirected weighted edges (weights must be positive).
inline NeighborhoodGraph graph_from_edges(Index num_vertices, const std::vector<std::pair<IndexPair, double>>& edges) {
  NeighborhoodGraph g;
  g.adjacency.resize(static_cast<std::size_t>(num_vertices));
  for (const auto& [pair, w] : edges) {
    const auto [i, j] = pair;
    if (i == j || i < 0 || j < 0 || i >= num_vertices || j >= num_vertices)
      throw InputError("graph_from_edges: bad edge endpoints");
    if (!(w > 0.0)) throw InputError("graph_from_edges: weights must be positive");
    g.adjacency[static_cast<std::size_t>(i)].push_back({j, w});
    g.adjacency[static_cast<std::size_t>(j)].push_back({i, w});
  }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end(), [](const Edge& x, const Edge& y) { return x.to < y.to; });
  detail::label_components(g);
  return g;
}

// Geodesics ----------------------------------------------------------------------

/// All-pairs shortest paths over `vertices` (original indices, ascending).
struct GeodesicMatrix {
  DistanceMatrix distances;
  std::vector<Index> vertices;
  /// The graph was disconnected and only its largest component is kept.
  bool restricted = false;
  Index unreachable_pairs = 0;
};

/// Single-source Dijkstra; +inf for unreachable vertices.
inline std::vector<double> dijkstra(const NeighborhoodGraph& g, Index source) {
  const auto s = static_cast<std::size_t>(g.num_vertices());
  std::vector<double> dist(s, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& e : g.adjacency[static_cast<std::size_t>(u)]) {
      const double cand = du + e.weight;
      if (cand < dist[static_cast<std::size_t>(e.to)]) {
        dist[static_cast<std::size_t>(e.to)] = cand;
        heap.emplace(cand, e.to);
      }
    }
  }
  return dist;
}

/// Shortest-path metric. A disconnected graph is restricted to its largest
/// component and flagged. The matrix is symmetrized with min(d_ij, d_ji),
/// which only differ by rounding in the summation order.
inline GeodesicMatrix geodesic_matrix(const NeighborhoodGraph& g, int threads = 0) {
  GeodesicMatrix gm;
  if (g.connected()) {
    gm.vertices.resize(static_cast<std::size_t>(g.num_vertices()));
    std::iota(gm.vertices.begin(), gm.vertices.end(), Index{0});
  } else {
    gm.vertices = g.largest_component();
    gm.restricted = true;
  }
  const auto n = static_cast<Index>(gm.vertices.size());
  gm.distances.resize(n, n);
  parallel_for(n, threads, [&](std::ptrdiff_t a) {
    const auto dist = dijkstra(g, gm.vertices[static_cast<std::size_t>(a)]);
    for (Index b = 0; b < n; ++b) gm.distances(a, b) = dist[static_cast<std::size_t>(gm.vertices[static_cast<std::size_t>(b)])];
  });
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) {
      const double v = std::min(gm.distances(a, b), gm.distances(b, a));
      gm.distances(a, b) = gm.distances(b, a) = v;
      if (!std::isfinite(v)) ++gm.unreachable_pairs;
    }
  return gm;
}

// Classical MDS ------------------------------------------------------------------

struct Embedding {
  RowMatrix coords;        // S x L_used
  Vector spectrum;         // all eigenvalues, nonincreasing
  Index requested_dim = 0;
  /// Fewer than the requested number of positive eigenvalues.
  bool truncated = false;
  double residual_variance = 0.0;
};

/// 1 - corr(a, b)^2 over two equally long samples.
inline double residual_variance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InputError("residual_variance: need equal lengths >= 2");
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return (saa == 0.0 && sbb == 0.0) ? 0.0 : 1.0;
  const double r = sab / std::sqrt(saa * sbb);
  return std::max(0.0, 1.0 - r * r);
}

inline Embedding classical_mds(const DistanceMatrix& d, Index dim) {
  const Index s = d.rows();
  if (dim < 1) throw InputError("classical_mds: L must be >= 1");
  if (d.cols() != s || s < 2) throw InputError("classical_mds: need a square matrix with S >= 2");
  if (!d.allFinite()) throw InputError("classical_mds: distance matrix has non-finite entries");
  if (dim > s) throw InputError("classical_mds: L exceeds S");

  Eigen::MatrixXd b = -0.5 * d.cwiseProduct(d);
  const Vector row_mean = b.rowwise().mean();
  const Eigen::RowVectorXd col_mean = b.colwise().mean();
  const double grand = b.mean();
  for (Index i = 0; i < s; ++i)
    for (Index j = 0; j < s; ++j) b(i, j) += grand - row_mean(i) - col_mean(j);
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw InputError("classical_mds: eigensolver failed");
  // ascending -> descending, stable on ties (lower original index first)
  std::vector<Index> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return ev(x) > ev(y); });

  Embedding e;
  e.requested_dim = dim;
  e.spectrum.resize(s);
  for (Index i = 0; i < s; ++i) e.spectrum(i) = ev(order[static_cast<std::size_t>(i)]);
  Index used = 0;
  while (used < dim && e.spectrum(used) > 0.0) ++used;
  e.truncated = used < dim;
  e.coords = RowMatrix::Zero(s, std::max<Index>(used, 1));
  const double scale = solver.eigenvectors().cwiseAbs().maxCoeff();
  for (Index c = 0; c < used; ++c) {
    Vector v = solver.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    for (Index i = 0; i < s; ++i)
      if (std::abs(v(i)) > 1e-12 * scale) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    e.coords.col(c) = v * std::sqrt(e.spectrum(c));
  }
  if (used == 0) e.coords.resize(s, 0);

  std::vector<double> target, embedded;
  target.reserve(static_cast<std::size_t>(s * (s - 1) / 2));
  embedded.reserve(target.capacity());
  for (Index i = 0; i < s; ++i)
    for (Index j = i + 1; j < s; ++j) {
      target.push_back(d(i, j));
      embedded.push_back(used ? euclidean_distance(e.coords.row(i), e.coords.row(j)) : 0.0);
    }
  // a single distance is reproduced exactly by any L >= 1
  e.residual_variance = target.size() < 2 ? 0.0 : residual_variance(embedded, target);
  return e;
}

struct IsomapResult {
  NeighborhoodGraph graph;
  GeodesicMatrix geodesics;
  Embedding embedding;
};

inline IsomapResult isomap(const PointCloud& cloud, const GraphRule& rule, Index dim, int threads = 0) {
  IsomapResult r;
  r.graph = build_graph(cloud, rule, threads);
  r.geodesics = geodesic_matrix(r.graph, threads);
  r.embedding = classical_mds(r.geodesics.distances, dim);
  return r;
}

// Graph quality --------------------------------------------------------------------

struct IsomapQuality {
  /// min over edges of chord / manifold geodesic, clipped to [0, 1].
  double rho = 1.0;
  IndexPair argmin_edge{-1, -1};
  Index edges = 0;
};

inline IsomapQuality estimate_rho(const PointCloud& cloud, const NeighborhoodGraph& g, const GeodesicOracle& geodesic) {
  cloud.validate();
  if (g.num_vertices() != cloud.size()) throw InputError("estimate_rho: graph and cloud sizes differ");
  IsomapQuality q;
  for (const auto& [i, j] : g.edges()) {
    ++q.edges;
    const double geo = geodesic(i, j);
    if (!(geo > 0.0)) continue;
    const double ratio = std::min(1.0, euclidean_distance(cloud.points.row(i), cloud.points.row(j)) / geo);
    if (ratio < q.rho) q.rho = ratio, q.argmin_edge = {i, j};
  }
  return q;
}

struct JointRhoReport {
  std::vector<double> component_rho;
  double joint_rho = 1.0;
  /// sqrt(sum_j rho_j^2 / J).
  double lower_bound = 0.0;
  Index edges = 0;
  Index violations = 0;
  double relative_tolerance = 1e-3;
};

/// Checks sqrt(sum_j rho_j^2 / J) <= ||p - q|| / d*(p, q) <= 1 on every edge of
/// the joint graph, where rho_j are the component ratios over the same edges.
/// The sandwich assumes isometric components.
inline JointRhoReport check_joint_rho(const JointCloud& joint, const NeighborhoodGraph& g,
                                      const std::vector<GeodesicOracle>& component_geodesics,
                                      const GeodesicOracle& joint_geodesic, double relative_tolerance = 1e-3) {
  joint.validate();
  if (component_geodesics.size() != joint.components.size())
    throw InputError("check_joint_rho: one geodesic oracle per component required");
  const PointCloud star = concat(joint);
  JointRhoReport r;
  r.relative_tolerance = relative_tolerance;
  const auto edges = g.edges();
  r.edges = static_cast<Index>(edges.size());
  r.component_rho.assign(joint.components.size(), 1.0);
  std::vector<double> joint_ratio;
  for (const auto& [i, j] : edges) {
    for (std::size_t c = 0; c < joint.components.size(); ++c) {
      const auto& pts = joint.components[c].points;
      const double geo = component_geodesics[c](i, j);
      if (geo > 0.0)
        r.component_rho[c] = std::min(r.component_rho[c], euclidean_distance(pts.row(i), pts.row(j)) / geo);
    }
    const double geo = joint_geodesic(i, j);
    joint_ratio.push_back(geo > 0.0 ? euclidean_distance(star.points.row(i), star.points.row(j)) / geo : 1.0);
  }
  double sum = 0.0;
  for (const double rho : r.component_rho) sum += rho * rho;
  r.lower_bound = std::sqrt(sum / static_cast<double>(joint.components.size()));
  for (const double ratio : joint_ratio) {
    r.joint_rho = std::min(r.joint_rho, ratio);
    if (ratio < r.lower_bound * (1.0 - relative_tolerance) || ratio > 1.0 + relative_tolerance) ++r.violations;
  }
  return r;
}

// Noisy distance concentration ------------------------------------------------------

struct ConcentrationReport {
  Index num_components = 0;
  double d = 0.0;
  double sigma = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  Index trials = 0;
  Index failures = 0;
  double coverage = 0.0;
  double bound = 0.0;          // 1 - 2 c^(-J^2)
  double log_c = 0.0;
  double monte_carlo_sigma = 0.0;
  double mean_squared_distance = 0.0;
  double expected_squared_distance = 0.0;  // ||p - q||^2 + 2 J sigma^2
  double bias_standard_error = 0.0;
  bool holds = false;  // coverage >= bound - 3 MC sigma

  double failure_rate() const { return static_cast<double>(failures) / static_cast<double>(trials); }
};

/// Monte Carlo estimate of P(1 - delta <= ||s - r||^2 / (||p - q||^2 + 2 J sigma^2) <= 1 + delta)
/// for s = p + n, r = q + n' with independent noise on every component.
/// Uses the mean-squared-norm convention (E||n_j||^2 = sigma^2, ||n_j||^2 <= eps).
inline ConcentrationReport jml_concentration(const JointManifoldSpec& spec, const NoiseModel& nm,
                                             const Vector& theta1, const Vector& theta2, Index trials,
                                             double delta, int threads = 0) {
  spec.validate();
  nm.validate();
  if (nm.convention != NormConvention::MeanSquaredNorm)
    throw ConfigError("jml_concentration uses the mean-squared-norm noise convention");
  if (trials < 1000) throw ConfigError("jml_concentration: trials must be >= 1000 for a meaningful Monte Carlo slack");
  if (!(delta > 0.0)) throw InputError("jml_concentration: delta must be positive");

  const auto j_count = static_cast<std::size_t>(spec.num_components());
  std::vector<Vector> p, q;
  for (const auto& c : spec.components) {
    p.push_back(c(theta1));
    q.push_back(c(theta2));
  }
  const double d = euclidean_distance(p[0], q[0]);
  if (!(d > 0.0)) throw InputError("jml_concentration: the two parameters map to the same point");
  for (std::size_t j = 1; j < j_count; ++j)
    if (std::abs(euclidean_distance(p[j], q[j]) - d) > 1e-9 * d)
      throw InputError("jml_concentration: component distances differ; use copies of one manifold");

  ConcentrationReport r;
  const auto jd = static_cast<double>(j_count);
  r.num_components = static_cast<Index>(j_count);
  r.d = d;
  r.sigma = nm.sigma;
  r.epsilon = nm.epsilon;
  r.delta = delta;
  r.trials = trials;
  const double s2 = nm.sigma * nm.sigma;
  r.expected_squared_distance = jd * d * d + 2.0 * jd * s2;
  const double base = (d * d + 2.0 * s2) / (d * std::sqrt(nm.epsilon) + nm.epsilon);
  r.log_c = 2.0 * delta * delta * base * base;
  r.bound = 1.0 - 2.0 * std::exp(-jd * jd * r.log_c);

  std::vector<double> sq(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](std::ptrdiff_t t) {
    double total = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
      const std::uint64_t stream = (static_cast<std::uint64_t>(t) * j_count + j) * 2;
      const Vector diff = (p[j] + noise_vector(nm, p[j].size(), stream)) - (q[j] + noise_vector(nm, q[j].size(), stream + 1));
      total += diff.squaredNorm();
    }
    sq[static_cast<std::size_t>(t)] = total;
  });
  double sum = 0.0, sum2 = 0.0;
  for (const double v : sq) {
    const double ratio = v / r.expected_squared_distance;
    if (ratio < 1.0 - delta || ratio > 1.0 + delta) ++r.failures;
    sum += v;
    sum2 += v * v;
  }
  const auto td = static_cast<double>(trials);
  r.coverage = 1.0 - r.failure_rate();
  r.monte_carlo_sigma = std::sqrt(r.coverage * (1.0 - r.coverage) / td);
  r.mean_squared_distance = sum / td;
  r.bias_standard_error = std::sqrt(std::max(0.0, sum2 / td - r.mean_squared_distance * r.mean_squared_distance) / td);
  r.holds = r.coverage >= r.bound - 3.0 * r.monte_carlo_sigma;
  return r;
}

// Ellipse experiment -------------------------------------------------------------------

/// Least-squares affine fit of the embedding onto the true parameters; RMSE of
/// the fitted parameters (Euclidean norm per sample, root mean square).
inline double affine_recovery_rmse(const RowMatrix& embedding, const RowMatrix& truth) {
  if (embedding.rows() != truth.rows() || embedding.rows() < 2)
    throw InputError("affine_recovery_rmse: row counts differ or too few samples");
  Eigen::MatrixXd a(embedding.rows(), embedding.cols() + 1);
  a.leftCols(embedding.cols()) = embedding;
  a.col(embedding.cols()).setOnes();
  const Eigen::MatrixXd t = truth;
  const Eigen::MatrixXd coef = a.colPivHouseholderQr().solve(t);
  const Eigen::MatrixXd res = a * coef - t;
  return std::sqrt(res.rowwise().squaredNorm().mean());
}

struct EllipseExperimentConfig {
  int img_side = 64;
  std::vector<std::pair<double, double>> axes{{7.0, 7.0}, {7.0, 6.0}, {7.0, 5.0}};
  ParamBox domain{Eigen::Vector2d(27.0, 27.0), Eigen::Vector2d(36.0, 36.0)};
  Index grid_side = 20;
  double smoothing_width = 8.0;
  bool binary = false;
  Index knn = 48;
  Index embed_dim = 2;
  std::vector<double> noise_levels{0.0, 0.1, 0.2, 0.3};
  std::uint64_t seed = 0;
};

struct EmbeddingRun {
  std::string label;
  double residual_variance = 0.0;
  /// Affine-aligned recovery RMSE divided by the grid spacing.
  double recovery_fraction = 0.0;
  bool graph_restricted = false;
  bool truncated = false;
  RowMatrix coords;
  RowMatrix params;
  Vector spectrum;
};

struct NoiseLevelResult {
  double noise_std = 0.0;
  std::vector<EmbeddingRun> components;
  EmbeddingRun joint;

  double mean_component_residual_variance() const {
    double m = 0.0;
    for (const auto& c : components) m += c.residual_variance;
    return m / static_cast<double>(components.size());
  }
  bool joint_le_mean() const { return joint.residual_variance <= mean_component_residual_variance(); }
};

struct EllipseExperimentReport {
  EllipseExperimentConfig config;
  double grid_spacing = 0.0;
  Index joint_dim = 0;
  std::vector<NoiseLevelResult> levels;
};

namespace detail {

inline EmbeddingRun embed_run(const PointCloud& cloud, const EllipseExperimentConfig& cfg, double spacing, int threads) {
  const IsomapResult iso = isomap(cloud, GraphRule::knn(cfg.knn), cfg.embed_dim, threads);
  EmbeddingRun run;
  run.label = cloud.label;
  run.residual_variance = iso.embedding.residual_variance;
  run.graph_restricted = iso.geodesics.restricted;
  run.truncated = iso.embedding.truncated;
  run.coords = iso.embedding.coords;
  run.spectrum = iso.embedding.spectrum;
  run.params.resize(static_cast<Index>(iso.geodesics.vertices.size()), cloud.param_dim());
  for (std::size_t i = 0; i < iso.geodesics.vertices.size(); ++i)
    run.params.row(static_cast<Index>(i)) = cloud.params.row(iso.geodesics.vertices[i]);
  run.recovery_fraction = affine_recovery_rmse(run.coords, run.params) / spacing;
  return run;
}

}  // namespace detail

/// Translating-ellipse image manifolds on a common grid, white Gaussian pixel
/// noise per noise level, Isomap per component and on the concatenation.
inline EllipseExperimentReport run_ellipse_experiment(const EllipseExperimentConfig& cfg, int threads = 0) {
  if (cfg.axes.empty()) throw ConfigError("ellipse experiment needs at least one ellipse");
  if (cfg.grid_side < 3) throw ConfigError("ellipse experiment grid_side must be >= 3");
  for (const double level : cfg.noise_levels)
    if (!(level >= 0.0)) throw ConfigError("ellipse experiment noise levels must be >= 0");
  EllipseExperimentReport report;
  report.config = cfg;
  const EllipseRender render{cfg.smoothing_width, cfg.binary};
  JointManifoldSpec spec;
  for (const auto& [a, b] : cfg.axes) spec.components.push_back(make_ellipse_manifold(a, b, cfg.img_side, render, cfg.domain));
  const Index count = cfg.grid_side * cfg.grid_side;
  report.grid_spacing = (cfg.domain.upper(0) - cfg.domain.lower(0)) / static_cast<double>(cfg.grid_side);
  const JointCloud clean = sample_joint(spec, SamplingStrategy::grid(), count, threads);
  report.joint_dim = clean.joint_dim();

  for (std::size_t level = 0; level < cfg.noise_levels.size(); ++level) {
    NoiseLevelResult res;
    res.noise_std = cfg.noise_levels[level];
    JointCloud noisy = clean;
    const std::uint64_t level_seed = derive_seed(cfg.seed, "ellipse/noise/" + std::to_string(level));
    for (std::size_t c = 0; c < noisy.components.size(); ++c) {
      auto& pts = noisy.components[c].points;
      if (res.noise_std > 0.0) {
        parallel_for(pts.rows(), threads, [&](std::ptrdiff_t i) {
          CounterRng rng(derive_seed(level_seed, static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(count) +
                                                     static_cast<std::uint64_t>(i)));
          std::normal_distribution<double> normal(0.0, res.noise_std);
          for (Index k = 0; k < pts.cols(); ++k) pts(i, k) += normal(rng);
        });
      }
      res.components.push_back(detail::embed_run(noisy.components[c], cfg, report.grid_spacing, threads));
    }
    res.joint = detail::embed_run(concat(noisy), cfg, report.grid_spacing, threads);
    res.joint.label = "joint";
    report.levels.push_back(std::move(res));
  }
  return report;
}

}  // namespace jointfold
